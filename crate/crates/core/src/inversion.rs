//! Differential inversion `w = (E')⁻¹·v` of the implicit Euler map
//! `E : x₀ ↦ x_m`.
//!
//! * [`diffinv_blackbox`] accumulates `E'` by running the whole integrator,
//!   Newton loop and LU solves included, over tangent numbers, then solves
//!   `E'·w = v`.
//! * [`diffinv_partial`] uses `dxᵢ/dxᵢ₋₁ = (dF/dxᵢ)⁻¹` to propagate `E'`
//!   alongside the primal steps, one factorization per step, then solves.
//! * [`diffinv_full`] records `dF/dxᵢ` on a tape and applies
//!   `(E')⁻¹·v = dF/dx₁ · … · dF/dx_m · v` right to left: matrix-vector
//!   products only, no factorization after the primal run.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::euler::{self, IntegrationConfig};
use crate::exec::Execution;
use crate::linalg::{self, DenseMatrix, FlopCounter, Matrix, StateVector};
use crate::ode::OdeSystem;
use crate::tangent;

pub const DEFAULT_FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Tangent-mode AD of the whole integrator.
    Blackbox,
    /// Step Jacobians inverted by LU and chained into `E'`.
    Partial,
    /// Taped step Jacobians applied to `v` in reverse.
    Full,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Blackbox, Algorithm::Partial, Algorithm::Full];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Blackbox => "blackbox",
            Algorithm::Partial => "partial",
            Algorithm::Full => "full",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blackbox" => Ok(Algorithm::Blackbox),
            "partial" => Ok(Algorithm::Partial),
            "full" => Ok(Algorithm::Full),
            other => Err(Error::InvalidInput(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub algorithm: Algorithm,
    /// `E(t, m, x0)`.
    pub x_final: StateVector,
    /// `(E')⁻¹·v`.
    pub w: StateVector,
    /// `E'`, for the algorithms that form it.
    pub jacobian: Option<DenseMatrix>,
    /// Everything, primal integration included.
    pub cost_total: FlopCounter,
    /// Work beyond the plain primal integration. For the black-box algorithm
    /// this is the whole tangent run plus the final solve.
    pub cost_inversion: FlopCounter,
    /// Peak tape size; zero for algorithms without a tape.
    pub tape_bytes: usize,
}

fn check_inputs<S: OdeSystem>(sys: &S, x0: &StateVector, v: &StateVector) -> Result<()> {
    for len in [x0.dim(), v.dim()] {
        if len != sys.dim() {
            return Err(Error::DimensionMismatch {
                expected: sys.dim(),
                found: len,
            });
        }
    }
    Ok(())
}

/// `E(x0)` and `E'(x0)` by vector tangent-mode AD of the integrator, seeded
/// with the identity.
pub fn jacobian_tangent<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<(StateVector, DenseMatrix)> {
    jacobian_tangent_counted(sys, x0, cfg, &mut FlopCounter::new())
}

pub fn jacobian_tangent_counted<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
    flops: &mut FlopCounter,
) -> Result<(StateVector, DenseMatrix)> {
    let seeded = tangent::seed(x0);
    let (xm, _) = euler::integrate_observed(sys, &seeded, cfg, flops, |_| Ok(()))?;
    Ok((
        StateVector::new(tangent::values(&xm))?,
        tangent::jacobian(&xm),
    ))
}

pub fn diffinv_blackbox<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    v: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<InversionResult> {
    check_inputs(sys, x0, v)?;
    let mut inv = FlopCounter::new();
    let (x_final, jac) = jacobian_tangent_counted(sys, x0, cfg, &mut inv)?;
    let lu = linalg::lu_factor(&jac, &mut inv)
        .map_err(Error::in_stage("blackbox: factorizing accumulated E'"))?;
    let w = lu.solve(v, &mut inv)?;
    Ok(InversionResult {
        algorithm: Algorithm::Blackbox,
        x_final,
        w: StateVector::new(w)?,
        jacobian: Some(jac),
        cost_total: inv,
        cost_inversion: inv,
        tape_bytes: 0,
    })
}

pub fn diffinv_partial<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    v: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<InversionResult> {
    check_inputs(sys, x0, v)?;
    let mut primal = FlopCounter::new();
    let mut inv = FlopCounter::new();
    let mut chained = DenseMatrix::identity(sys.dim());
    let (x_final, _) = euler::integrate_observed(sys, x0.as_slice(), cfg, &mut primal, |step| {
        let jac = euler::residual_jacobian(sys, &step.report.solution, step.dt, step.t)?;
        let lu = linalg::lu_factor(&jac, &mut inv)?;
        chained = lu.solve_multi(&chained, &mut inv)?;
        Ok(())
    })?;
    let lu = linalg::lu_factor(&chained, &mut inv)
        .map_err(Error::in_stage("partial: factorizing accumulated E'"))?;
    let w = lu.solve(v, &mut inv)?;
    let mut total = primal;
    total.merge(&inv);
    Ok(InversionResult {
        algorithm: Algorithm::Partial,
        x_final: StateVector::new(x_final)?,
        w: StateVector::new(w)?,
        jacobian: Some(chained),
        cost_total: total,
        cost_inversion: inv,
        tape_bytes: 0,
    })
}

pub fn diffinv_full<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    v: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<InversionResult> {
    check_inputs(sys, x0, v)?;
    let mut primal = FlopCounter::new();
    let (x_final, mut tape) = euler::integrate_recording_counted(sys, x0, cfg, &mut primal)?;
    let tape_bytes = tape.bytes();
    let mut inv = FlopCounter::new();
    let mut w = v.to_vec();
    while let Some(jac) = tape.pop() {
        w = linalg::mat_vec(&jac, &w, &mut inv)?;
    }
    let mut total = primal;
    total.merge(&inv);
    Ok(InversionResult {
        algorithm: Algorithm::Full,
        x_final,
        w: StateVector::new(w)?,
        jacobian: None,
        cost_total: total,
        cost_inversion: inv,
        tape_bytes,
    })
}

pub fn diffinv<S: OdeSystem>(
    algorithm: Algorithm,
    sys: &S,
    x0: &StateVector,
    v: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<InversionResult> {
    match algorithm {
        Algorithm::Blackbox => diffinv_blackbox(sys, x0, v, cfg),
        Algorithm::Partial => diffinv_partial(sys, x0, v, cfg),
        Algorithm::Full => diffinv_full(sys, x0, v, cfg),
    }
}

/// Central finite-difference approximation of `E'`, one column per input
/// direction. Columns are independent and evaluated under `exec`.
pub fn fd_jacobian_with<S: OdeSystem>(
    exec: Execution,
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
    h: f64,
) -> Result<DenseMatrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let n = x0.dim();
    let columns = exec.map(n, |j| -> Result<Vec<f64>> {
        let shifted = |sign: f64| {
            let mut x = x0.to_vec();
            x[j] += sign * h;
            euler::integrate(sys, &StateVector::new(x)?, cfg)
        };
        let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
        Ok(plus
            .iter()
            .zip(minus.iter())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    });
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_fn(n, n, |i, j| columns[j][i]))
}

pub fn fd_jacobian<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
    h: f64,
) -> Result<DenseMatrix> {
    fd_jacobian_with(Execution::default(), sys, x0, cfg, h)
}

/// One differential inversion task.
#[derive(Clone, Debug)]
pub struct Problem<S> {
    pub system: S,
    pub x0: StateVector,
    pub v: StateVector,
    pub cfg: IntegrationConfig,
}

/// Runs `algorithm` on independent problems under `exec`.
pub fn invert_batch<S: OdeSystem>(
    exec: Execution,
    algorithm: Algorithm,
    problems: &[Problem<S>],
) -> Vec<Result<InversionResult>> {
    exec.map_slice(problems, |p| {
        diffinv(algorithm, &p.system, &p.x0, &p.v, &p.cfg)
    })
}

/// Max-norm relative difference `‖a − b‖∞ / max(‖b‖∞, tiny)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
