//! Self-checks bundled into `diffinv verify`.
//!
//! Each check re-derives a property of the integrator or the inversion
//! algorithms from an independent route and reports pass or fail. Checks are
//! independent of each other and run under an [`Execution`] policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::euler::{self, IntegrationConfig};
use crate::exec::Execution;
use crate::inversion::{self, relative_error, Algorithm, DEFAULT_FD_STEP};
use crate::linalg::{self, DenseMatrix, FlopCounter, Matrix, StateVector};
use crate::ode::{make_random_glv, GlvParams, LotkaVolterra2, OdeSystem, System};

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Only run checks whose name contains this string.
    pub filter: Option<String>,
    /// Added to every entry of the tangent-mode Jacobian before it is
    /// compared with finite differences. Test hook; zero in normal runs.
    pub perturb_jacobian: f64,
    pub execution: Execution,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckFn = fn(&VerifyOptions) -> Result<String, String>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("lemma1-inverse-chain", check_lemma1),
    ("lemma2-single-step", check_lemma2),
    ("fd-vs-ad", check_fd_vs_ad),
    ("cross-algorithm", check_cross_algorithm),
    ("closed-form", check_closed_form),
    ("inverse-consistency", check_inverse_consistency),
    ("convergence-order", check_convergence_order),
    ("newton-contract", check_newton_contract),
    ("reference-value", check_reference_value),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check selected by `opts.filter`, in declaration order.
pub fn run(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let selected: Vec<_> = CHECKS
        .iter()
        .filter(|(name, _)| opts.filter.as_deref().is_none_or(|f| name.contains(f)))
        .collect();
    opts.execution.map_slice(&selected, |(name, check)| {
        let (passed, detail) = match check(opts) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        CheckOutcome {
            name,
            passed,
            detail,
        }
    })
}

/// Diagonally dominant random matrix: off-diagonal entries uniform in
/// `[−1, 1]`, diagonal `±(n + 1 + u)`.
pub fn random_well_conditioned(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    Matrix::from_fn(n, n, |i, j| {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        if i == j {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * (n as f64 + 1.0 + u.abs())
        } else {
            u
        }
    })
}

fn num(e: Error) -> String {
    e.to_string()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cfg(t: f64, m: usize) -> IntegrationConfig {
    IntegrationConfig::new(t, m).expect("static config")
}

fn check_lemma1(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for n in 1..=8 {
        for k in 1..=10 {
            let chain: Vec<DenseMatrix> = (0..k)
                .map(|_| random_well_conditioned(n, &mut rng))
                .collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut f = FlopCounter::new();
            // A₁⁻¹·(…·(A_k⁻¹·v))
            let mut w = v.clone();
            for a in chain.iter().rev() {
                w = linalg::solve(a, &w, &mut f).map_err(num)?;
            }
            // (A_k·…·A₁)·z = v
            let mut product = chain[0].clone();
            for a in &chain[1..] {
                product = linalg::mat_mat(a, &product, &mut f).map_err(num)?;
            }
            let z = linalg::solve(&product, &v, &mut f).map_err(num)?;
            worst = worst.max(relative_error(&w, &z));
        }
    }
    ensure(worst <= 1e-8, || {
        format!("max relative error {worst:e} > 1e-8")
    })?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn check_lemma2(_: &VerifyOptions) -> Result<String, String> {
    let systems = [
        System::LotkaVolterra2(LotkaVolterra2),
        System::Glv(make_random_glv(6, 4).map_err(num)?),
    ];
    let mut worst = 0.0_f64;
    for sys in &systems {
        let c = cfg(0.1, 1);
        let x0 = StateVector::ones(sys.dim());
        let r = inversion::diffinv_partial(sys, &x0, &x0, &c).map_err(num)?;
        let (_, e_prime) = inversion::jacobian_tangent(sys, &x0, &c).map_err(num)?;
        let step = euler::residual_jacobian(sys, &r.x_final, c.dt(), c.t_final).map_err(num)?;
        let id = DenseMatrix::identity(sys.dim());
        let mut f = FlopCounter::new();
        for j in [&e_prime, r.jacobian.as_ref().expect("partial forms E'")] {
            let prod = linalg::mat_mat(j, &step, &mut f).map_err(num)?;
            worst = worst.max(prod.max_abs_diff(&id));
        }
    }
    ensure(worst <= 1e-9, || {
        format!("|E'·dF/dx₁ − I| = {worst:e} > 1e-9")
    })?;
    Ok(format!("|E'·dF/dx₁ − I| = {worst:.2e}"))
}

fn check_fd_vs_ad(opts: &VerifyOptions) -> Result<String, String> {
    let mut systems = vec![System::LotkaVolterra2(LotkaVolterra2)];
    for n in [2, 4, 8] {
        systems.push(System::Glv(
            make_random_glv(n, 100 + n as u64).map_err(num)?,
        ));
    }
    let c = cfg(1.0, 200);
    let mut worst = 0.0_f64;
    for sys in &systems {
        let x0 = StateVector::ones(sys.dim());
        let (_, ad) = inversion::jacobian_tangent(sys, &x0, &c).map_err(num)?;
        let ad = ad.map(|v| v + opts.perturb_jacobian);
        let fd = inversion::fd_jacobian_with(opts.execution, sys, &x0, &c, DEFAULT_FD_STEP)
            .map_err(num)?;
        worst = worst.max(ad.max_abs_diff(&fd));
    }
    ensure(worst <= 1e-5, || {
        format!("max |AD − FD| = {worst:e} > 1e-5")
    })?;
    Ok(format!("max |AD − FD| = {worst:.2e}"))
}

/// Worst pairwise relative difference of `w` across the three algorithms.
pub fn cross_algorithm_spread<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    v: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<f64> {
    let ws = Algorithm::ALL
        .iter()
        .map(|&a| inversion::diffinv(a, sys, x0, v, cfg).map(|r| r.w))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0_f64;
    for a in &ws {
        for b in &ws {
            worst = worst.max(relative_error(a, b));
        }
    }
    Ok(worst)
}

fn check_cross_algorithm(opts: &VerifyOptions) -> Result<String, String> {
    let lv_cfg = cfg(1.0, 1000);
    let x0 = StateVector::ones(2);
    let xm = euler::integrate(&LotkaVolterra2, &x0, &lv_cfg).map_err(num)?;
    let mut worst = cross_algorithm_spread(&LotkaVolterra2, &x0, &xm, &lv_cfg).map_err(num)?;
    let instances: Vec<(usize, u64)> = (0..10u64)
        .map(|s| ([4, 8, 12][s as usize % 3], s))
        .collect();
    let spreads = opts.execution.map_slice(&instances, |&(n, seed)| {
        let sys = make_random_glv(n, seed)?;
        let x0 = StateVector::ones(n);
        let v = StateVector::new((0..n).map(|k| 1.0 + k as f64 / n as f64).collect())?;
        cross_algorithm_spread(&sys, &x0, &v, &cfg(1.0, 200))
    });
    for s in spreads {
        worst = worst.max(s.map_err(num)?);
    }
    ensure(worst <= 1e-8, || {
        format!("max pairwise relative error {worst:e} > 1e-8")
    })?;
    Ok(format!("max pairwise relative error {worst:.2e}"))
}

fn check_closed_form(_: &VerifyOptions) -> Result<String, String> {
    let sys = GlvParams::linear(-1.0);
    let x0 = StateVector::ones(1);
    let v = StateVector::new(vec![0.75]).map_err(num)?;
    let mut worst_full = 0.0_f64;
    let mut worst_bb = 0.0_f64;
    for m in [10, 100, 1000] {
        let c = cfg(1.0, m);
        let expected = (1.0 + c.dt()).powi(m as i32) * v[0];
        let full = inversion::diffinv_full(&sys, &x0, &v, &c).map_err(num)?;
        let bb = inversion::diffinv_blackbox(&sys, &x0, &v, &c).map_err(num)?;
        worst_full = worst_full.max(((full.w[0] - expected) / expected).abs());
        worst_bb = worst_bb.max(((bb.w[0] - expected) / expected).abs());
    }
    ensure(worst_full <= 1e-12 && worst_bb <= 1e-10, || {
        format!("full {worst_full:e} (≤1e-12), blackbox {worst_bb:e} (≤1e-10)")
    })?;
    Ok(format!("full {worst_full:.2e}, blackbox {worst_bb:.2e}"))
}

fn check_inverse_consistency(_: &VerifyOptions) -> Result<String, String> {
    let systems = [
        System::LotkaVolterra2(LotkaVolterra2),
        System::Glv(GlvParams::linear(-1.0)),
        System::Glv(GlvParams::zero(3)),
        System::Glv(make_random_glv(8, 8).map_err(num)?),
    ];
    let c = cfg(1.0, 500);
    let mut worst = 0.0_f64;
    for sys in &systems {
        let n = sys.dim();
        let x0 = StateVector::ones(n);
        let v = StateVector::new((0..n).map(|k| (k as f64 + 1.0).sin() + 2.0).collect())
            .map_err(num)?;
        let (_, e_prime) = inversion::jacobian_tangent(sys, &x0, &c).map_err(num)?;
        let w = inversion::diffinv_full(sys, &x0, &v, &c).map_err(num)?.w;
        let back = linalg::mat_vec(&e_prime, &w, &mut FlopCounter::new()).map_err(num)?;
        worst = worst.max(relative_error(&back, &v));
    }
    ensure(worst <= 1e-7, || {
        format!("|E'·w − v|/|v| = {worst:e} > 1e-7")
    })?;
    Ok(format!("|E'·w − v|/|v| = {worst:.2e}"))
}

/// Errors of implicit Euler against `e^{−1}` for `dx/dt = −x`, `x(0) = 1`.
pub fn linear_errors(steps: &[usize]) -> Result<Vec<f64>> {
    let exact = (-1.0_f64).exp();
    steps
        .iter()
        .map(|&m| {
            let x = euler::integrate(
                &GlvParams::linear(-1.0),
                &StateVector::ones(1),
                &IntegrationConfig::new(1.0, m)?,
            )?;
            Ok((x[0] - exact).abs())
        })
        .collect()
}

fn check_convergence_order(_: &VerifyOptions) -> Result<String, String> {
    let errors = linear_errors(&[100, 200, 400, 800]).map_err(num)?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    ensure(ratios.iter().all(|r| (1.8..=2.2).contains(r)), || {
        format!("error ratios {ratios:?} outside [1.8, 2.2]")
    })?;
    Ok(format!("error ratios {ratios:.3?}"))
}

fn check_newton_contract(_: &VerifyOptions) -> Result<String, String> {
    let systems = [
        System::LotkaVolterra2(LotkaVolterra2),
        System::Glv(make_random_glv(10, 5).map_err(num)?),
    ];
    let c = cfg(1.0, 200);
    let mut worst = 0.0_f64;
    for sys in &systems {
        let x0 = StateVector::ones(sys.dim());
        let mut f = FlopCounter::new();
        euler::integrate_observed(sys, x0.as_slice(), &c, &mut f, |step| {
            worst = worst.max(step.report.final_residual_norm);
            Ok(())
        })
        .map_err(num)?;
    }
    ensure(worst <= c.newton_tol, || {
        format!("accepted step with |F| = {worst:e}")
    })?;
    // dt·r₀ = 1 makes dF/dx singular in its first row.
    let singular = GlvParams::new(vec![10.0, 0.5], DenseMatrix::zeros(2, 2)).map_err(num)?;
    match euler::integrate(&singular, &StateVector::ones(2), &cfg(1.0, 10)) {
        Err(e) if matches!(e.root(), Error::SingularMatrix { .. }) => {}
        other => return Err(format!("rank-deficient step Jacobian gave {other:?}")),
    }
    Ok(format!(
        "max accepted |F| = {worst:.2e}; singular step detected"
    ))
}

fn check_reference_value(_: &VerifyOptions) -> Result<String, String> {
    let c = cfg(1.0, 1000);
    let x0 = StateVector::ones(2);
    let xm = euler::integrate(&LotkaVolterra2, &x0, &c).map_err(num)?;
    let w = inversion::diffinv_full(&LotkaVolterra2, &x0, &xm, &c)
        .map_err(num)?
        .w;
    let printed = [crate::cli::format_g(w[0]), crate::cli::format_g(w[1])];
    ensure(printed == ["1.31161", "0.593445"], || {
        format!("(E')⁻¹·E(x0) printed as {printed:?}")
    })?;
    Ok(format!("(E')⁻¹·E(x0) = ({}, {})", printed[0], printed[1]))
}
