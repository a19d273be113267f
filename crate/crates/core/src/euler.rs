//! Implicit Euler integration with a Newton inner solver.
//!
//! Step `i` solves `F(xᵢ, xᵢ₋₁, Δt) = xᵢ − xᵢ₋₁ − Δt·G(tᵢ, xᵢ) = 0` for `xᵢ`,
//! starting Newton from `xᵢ₋₁`. The recording variant pushes the step
//! Jacobian `dF/dxᵢ = I − Δt·dG/dx` at each converged `xᵢ` onto a [`Tape`].

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, FlopCounter, Matrix, Scalar, StateVector};
use crate::ode::OdeSystem;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;

/// Target time, step count and Newton controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationConfig {
    pub t_final: f64,
    pub m: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl IntegrationConfig {
    pub fn new(t_final: f64, m: usize) -> Result<Self> {
        let cfg = IntegrationConfig {
            t_final,
            m,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target time must be positive, got {}",
                self.t_final
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig(
                "number of steps must be at least 1".into(),
            ));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Newton tolerance must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidConfig(
                "Newton iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Uniform step `Δt = t_final / m`.
    pub fn dt(&self) -> f64 {
        self.t_final / self.m as f64
    }

    /// Time at the end of step `i` (1-based).
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    pub final_residual_norm: f64,
}

/// `F(x, x_prev, Δt) = x − x_prev − Δt·G(tᵢ, x)`.
pub fn residual<T: Scalar, S: OdeSystem>(
    sys: &S,
    x: &[T],
    x_prev: &[T],
    dt: f64,
    t_i: f64,
) -> Result<Vec<T>> {
    if x.len() != sys.dim() || x_prev.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: if x.len() != sys.dim() {
                x.len()
            } else {
                x_prev.len()
            },
        });
    }
    let g = sys.rhs(t_i, x);
    Ok(x.iter()
        .zip(x_prev)
        .zip(g)
        .map(|((xi, pi), gi)| xi.clone() - pi.clone() - gi * dt)
        .collect())
}

/// `dF/dx = I − Δt·dG/dx (tᵢ, x)`.
pub fn residual_jacobian<T: Scalar, S: OdeSystem>(
    sys: &S,
    x: &[T],
    dt: f64,
    t_i: f64,
) -> Result<Matrix<T>> {
    if x.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x.len(),
        });
    }
    let g = sys.jacobian(t_i, x);
    Ok(Matrix::from_fn(g.rows(), g.cols(), |i, j| {
        let scaled = -(g[(i, j)].clone() * dt);
        if i == j {
            scaled + 1.0
        } else {
            scaled
        }
    }))
}

/// Solves one implicit Euler step by Newton's method, starting at `x_prev`.
///
/// At least one Newton update is always taken, so the derivative parts of
/// tangent inputs pick up the step Jacobian even when the start value already
/// satisfies the tolerance.
pub fn newton_solve<T: Scalar, S: OdeSystem>(
    sys: &S,
    x_prev: &[T],
    dt: f64,
    t_i: f64,
    cfg: &IntegrationConfig,
    flops: &mut FlopCounter,
) -> Result<NewtonReport<T>> {
    let mut x = x_prev.to_vec();
    let mut r = residual(sys, &x, x_prev, dt, t_i)?;
    let mut iterations = 0;
    loop {
        if iterations == cfg.newton_max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: linalg::norm2(&r),
            });
        }
        let jac = residual_jacobian(sys, &x, dt, t_i)?;
        let neg_r: Vec<T> = r.into_iter().map(|v| -v).collect();
        let delta = linalg::solve(&jac, &neg_r, flops)?;
        x = x.into_iter().zip(delta).map(|(a, d)| a + d).collect();
        r = residual(sys, &x, x_prev, dt, t_i)?;
        iterations += 1;
        let norm = linalg::norm2(&r);
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        if norm <= cfg.newton_tol {
            return Ok(NewtonReport {
                solution: x,
                iterations,
                final_residual_norm: norm,
            });
        }
    }
}

/// What the integrator hands to a step observer after each converged step.
#[derive(Debug)]
pub struct StepInfo<'a, T> {
    /// 1-based step index.
    pub index: usize,
    pub t: f64,
    pub dt: f64,
    pub report: &'a NewtonReport<T>,
}

/// Summary of a completed integration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub max_residual_norm: f64,
}

/// Runs `m` implicit Euler steps from `x0`, calling `observe` after each one.
pub fn integrate_observed<T, S, F>(
    sys: &S,
    x0: &[T],
    cfg: &IntegrationConfig,
    flops: &mut FlopCounter,
    mut observe: F,
) -> Result<(Vec<T>, IntegrationStats)>
where
    T: Scalar,
    S: OdeSystem,
    F: FnMut(&StepInfo<'_, T>) -> Result<()>,
{
    cfg.validate()?;
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    let dt = cfg.dt();
    let mut stats = IntegrationStats::default();
    let mut x = x0.to_vec();
    for i in 1..=cfg.m {
        let t = cfg.time_at(i);
        let report = newton_solve(sys, &x, dt, t, cfg, flops).map_err(Error::at_step(i))?;
        if let Some(k) = report.solution.iter().position(|v| !v.value().is_finite()) {
            return Err(Error::at_step(i)(Error::NonFinite { index: k }));
        }
        stats.newton_iterations += report.iterations;
        stats.max_newton_iterations = stats.max_newton_iterations.max(report.iterations);
        stats.max_residual_norm = stats.max_residual_norm.max(report.final_residual_norm);
        observe(&StepInfo {
            index: i,
            t,
            dt,
            report: &report,
        })
        .map_err(Error::at_step(i))?;
        x = report.solution;
    }
    Ok((x, stats))
}

/// `E(t_final, m, x0)`.
pub fn integrate<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<StateVector> {
    integrate_counted(sys, x0, cfg, &mut FlopCounter::new())
}

pub fn integrate_counted<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
    flops: &mut FlopCounter,
) -> Result<StateVector> {
    let (x, _) = integrate_observed(sys, x0.as_slice(), cfg, flops, |_| Ok(()))?;
    StateVector::new(x)
}

/// As [`integrate`], additionally recording `dF/dxᵢ` at every converged `xᵢ`.
pub fn integrate_recording<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
) -> Result<(StateVector, Tape)> {
    integrate_recording_counted(sys, x0, cfg, &mut FlopCounter::new())
}

pub fn integrate_recording_counted<S: OdeSystem>(
    sys: &S,
    x0: &StateVector,
    cfg: &IntegrationConfig,
    flops: &mut FlopCounter,
) -> Result<(StateVector, Tape)> {
    let mut tape = Tape::with_capacity(sys.dim(), cfg.m);
    let (x, _) = integrate_observed(sys, x0.as_slice(), cfg, flops, |step| {
        let jac = residual_jacobian(sys, &step.report.solution, step.dt, step.t)?;
        tape.push(&jac)
    })?;
    Ok((StateVector::new(x)?, tape))
}

/// LIFO stack of `n × n` step Jacobians in one contiguous buffer.
#[derive(Clone, Debug)]
pub struct Tape {
    n: usize,
    data: Vec<f64>,
}

impl Tape {
    pub fn new(n: usize) -> Self {
        Tape {
            n,
            data: Vec::new(),
        }
    }

    /// Tape sized for exactly `entries` pushes.
    pub fn with_capacity(n: usize, entries: usize) -> Self {
        Tape {
            n,
            data: Vec::with_capacity(entries * n * n),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.data.len() / (self.n * self.n)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, jac: &DenseMatrix) -> Result<()> {
        if jac.rows() != self.n || jac.cols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: jac.rows(),
            });
        }
        self.data.extend_from_slice(jac.as_slice());
        Ok(())
    }

    pub fn top(&self) -> Option<DenseMatrix> {
        let nn = self.n * self.n;
        if self.data.len() < nn || nn == 0 {
            return None;
        }
        let start = self.data.len() - nn;
        Some(Matrix::from_row_major(self.n, self.n, self.data[start..].to_vec()).expect("n x n"))
    }

    pub fn pop(&mut self) -> Option<DenseMatrix> {
        let top = self.top()?;
        self.data.truncate(self.data.len() - self.n * self.n);
        Some(top)
    }

    /// Bytes held by the tape: its reserved buffer plus the header.
    pub fn bytes(&self) -> usize {
        self.data.capacity() * std::mem::size_of::<f64>() + std::mem::size_of::<Self>()
    }
}
