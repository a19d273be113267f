//! Right-hand sides `G(t, x)` of `dx/dt = G(t, x)` with analytic Jacobians.
//!
//! Systems are evaluable over any [`Scalar`], so the same definition serves
//! the plain integrator and the tangent-mode black-box differentiation.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Matrix, Scalar};

pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;

    /// `G(t, x)`.
    fn rhs<T: Scalar>(&self, t: f64, x: &[T]) -> Vec<T>;

    /// `dG/dx (t, x)`.
    fn jacobian<T: Scalar>(&self, t: f64, x: &[T]) -> Matrix<T>;
}

/// Two-species predator-prey model:
/// `x₀' = 1.1·x₀ − 0.5·x₀·x₁`, `x₁' = −0.75·x₁ + 0.25·x₀·x₁`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LotkaVolterra2;

impl OdeSystem for LotkaVolterra2 {
    fn dim(&self) -> usize {
        2
    }

    fn rhs<T: Scalar>(&self, _t: f64, x: &[T]) -> Vec<T> {
        let (x0, x1) = (&x[0], &x[1]);
        vec![
            x0.clone() * 1.1 - x0.clone() * 0.5 * x1.clone(), // prey
            x1.clone() * -0.75 + x0.clone() * 0.25 * x1.clone(), // predators
        ]
    }

    fn jacobian<T: Scalar>(&self, _t: f64, x: &[T]) -> Matrix<T> {
        let (x0, x1) = (&x[0], &x[1]);
        let entries = vec![
            -(x1.clone() * 0.5) + 1.1,
            x0.clone() * -0.5,
            x1.clone() * 0.25,
            x0.clone() * 0.25 - 0.75,
        ];
        Matrix::from_row_major(2, 2, entries).expect("2x2")
    }
}

/// Parameters of the generalized Lotka-Volterra model
/// `x_k' = x_k · (r + A·x)_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlvParams {
    r: Vec<f64>,
    a: DenseMatrix,
}

impl GlvParams {
    pub fn new(r: Vec<f64>, a: DenseMatrix) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidInput(
                "GLV dimension must be at least 1".into(),
            ));
        }
        if a.rows() != r.len() || a.cols() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                found: if a.rows() != r.len() {
                    a.rows()
                } else {
                    a.cols()
                },
            });
        }
        if r.iter().chain(a.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("GLV parameters must be finite".into()));
        }
        Ok(GlvParams { r, a })
    }

    /// `dx/dt = λ·x` in one dimension.
    pub fn linear(lambda: f64) -> Self {
        GlvParams::new(vec![lambda], DenseMatrix::zeros(1, 1)).expect("valid")
    }

    /// `G ≡ 0` in `n` dimensions.
    pub fn zero(n: usize) -> Self {
        GlvParams::new(vec![0.0; n], DenseMatrix::zeros(n, n)).expect("valid")
    }

    /// The two-species model written as a GLV instance.
    pub fn lv2_embedding() -> Self {
        let a = DenseMatrix::from_rows(&[vec![0.0, -0.5], vec![0.25, 0.0]]).expect("2x2");
        GlvParams::new(vec![1.1, -0.75], a).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn growth_rates(&self) -> &[f64] {
        &self.r
    }

    pub fn interactions(&self) -> &DenseMatrix {
        &self.a
    }

    /// `r_k + (A·x)_k` for every `k`.
    fn fitness<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.dim())
            .map(|k| {
                self.a
                    .row(k)
                    .iter()
                    .zip(x)
                    .fold(x[0].constant_like(self.r[k]), |acc, (&akj, xj)| {
                        acc + xj.clone() * akj
                    })
            })
            .collect()
    }

    /// Plain-text form: `n`, then `r`, then `A` row-major, whitespace separated.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut s = format!("{n}\n");
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "{}", join(&self.r));
        for k in 0..n {
            let _ = writeln!(s, "{}", join(self.a.row(k)));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("missing dimension".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("dimension: {e}")))?;
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n + n * n {
            return Err(Error::Parse(format!(
                "expected {} numbers after the dimension, found {}",
                n + n * n,
                values.len()
            )));
        }
        let (r, a) = values.split_at(n);
        GlvParams::new(r.to_vec(), Matrix::from_row_major(n, n, a.to_vec())?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        GlvParams::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl OdeSystem for GlvParams {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn rhs<T: Scalar>(&self, _t: f64, x: &[T]) -> Vec<T> {
        self.fitness(x)
            .into_iter()
            .zip(x)
            .map(|(f, xk)| xk.clone() * f)
            .collect()
    }

    fn jacobian<T: Scalar>(&self, _t: f64, x: &[T]) -> Matrix<T> {
        let f = self.fitness(x);
        let n = self.dim();
        Matrix::from_fn(n, n, |k, j| {
            let coupling = x[k].clone() * self.a[(k, j)];
            if k == j {
                coupling + f[k].clone()
            } else {
                coupling
            }
        })
    }
}

/// Random GLV instance for scaling benchmarks, deterministic in `seed`.
///
/// `A = −I + P/(2n)` with `P` uniform in `[−1, 1]` and `r` uniform in
/// `[0, 0.5]`: self-limiting species with weak couplings.
pub fn make_random_glv(n: usize, seed: u64) -> Result<GlvParams> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "GLV dimension must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = (0..n).map(|_| rng.gen_range(0.0..=0.5)).collect();
    let scale = 1.0 / (2.0 * n as f64);
    let a = Matrix::from_fn(n, n, |i, j| {
        let diag = if i == j { -1.0 } else { 0.0 };
        diag + rng.gen_range(-1.0..=1.0) * scale
    });
    GlvParams::new(r, a)
}

/// Any built-in system, for runtime selection.
#[derive(Clone, Debug)]
pub enum System {
    LotkaVolterra2(LotkaVolterra2),
    Glv(GlvParams),
}

impl OdeSystem for System {
    fn dim(&self) -> usize {
        match self {
            System::LotkaVolterra2(s) => s.dim(),
            System::Glv(s) => s.dim(),
        }
    }

    fn rhs<T: Scalar>(&self, t: f64, x: &[T]) -> Vec<T> {
        match self {
            System::LotkaVolterra2(s) => s.rhs(t, x),
            System::Glv(s) => s.rhs(t, x),
        }
    }

    fn jacobian<T: Scalar>(&self, t: f64, x: &[T]) -> Matrix<T> {
        match self {
            System::LotkaVolterra2(s) => s.jacobian(t, x),
            System::Glv(s) => s.jacobian(t, x),
        }
    }
}
