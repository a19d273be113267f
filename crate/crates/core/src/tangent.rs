//! Vector tangent-mode AD numbers.
//!
//! A [`Tangent`] carries a value and `d` directional derivatives. Running a
//! program generic over [`Scalar`] with inputs from [`seed`] yields the
//! program's Jacobian in the derivative parts of its outputs.
//!
//! Ordering and equality look at the value part only, so iterative solvers
//! (pivot search, convergence tests) take the same branches as the plain
//! `f64` run.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Matrix, Scalar};

#[derive(Clone, Debug)]
pub struct Tangent {
    value: f64,
    derivative: Vec<f64>,
}

/// Elemental binary operation, for [`Tangent::arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl Tangent {
    pub fn new(value: f64, derivative: Vec<f64>) -> Self {
        Tangent { value, derivative }
    }

    /// Constant of width `width`: zero derivative.
    pub fn lift(c: f64, width: usize) -> Self {
        Tangent {
            value: c,
            derivative: vec![0.0; width],
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn derivative(&self) -> &[f64] {
        &self.derivative
    }

    pub fn width(&self) -> usize {
        self.derivative.len()
    }

    /// Checked binary arithmetic: rejects mismatched widths and division by a
    /// zero value part.
    pub fn arith(a: &Tangent, b: &Tangent, op: BinOp) -> Result<Tangent> {
        if a.width() != b.width() {
            return Err(Error::WidthMismatch {
                expected: a.width(),
                found: b.width(),
            });
        }
        if op == BinOp::Div && b.value == 0.0 {
            return Err(Error::DivisionByZeroValue);
        }
        let (a, b) = (a.clone(), b.clone());
        Ok(match op {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        })
    }

    /// Square root; `d√u = du / (2√u)`.
    pub fn sqrt(self) -> Result<Tangent> {
        let s = self.value.sqrt();
        if s == 0.0 {
            if self.derivative.iter().any(|&d| d != 0.0) {
                return Err(Error::SqrtOfZero);
            }
            return Ok(self);
        }
        let mut out = self;
        out.value = s;
        let half_inv = 0.5 / s;
        out.derivative.iter_mut().for_each(|d| *d *= half_inv);
        Ok(out)
    }

    /// Value-part ordering; derivative parts are ignored.
    pub fn compare(&self, other: &Tangent) -> Ordering {
        self.value.total_cmp(&other.value)
    }

    fn assert_width(&self, other: &Tangent) {
        assert_eq!(
            self.width(),
            other.width(),
            "tangent width mismatch in arithmetic"
        );
    }
}

/// Seeds `x0` with the identity: component `i` gets derivative `e_i`.
pub fn seed(x0: &[f64]) -> Vec<Tangent> {
    let n = x0.len();
    x0.iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            Tangent::new(v, d)
        })
        .collect()
}

/// Seeds `x0` with the columns of `directions` (`n × d`).
pub fn seed_with(x0: &[f64], directions: &DenseMatrix) -> Result<Vec<Tangent>> {
    if directions.rows() != x0.len() {
        return Err(Error::WidthMismatch {
            expected: x0.len(),
            found: directions.rows(),
        });
    }
    Ok(x0
        .iter()
        .enumerate()
        .map(|(i, &v)| Tangent::new(v, directions.row(i).to_vec()))
        .collect())
}

pub fn values(x: &[Tangent]) -> Vec<f64> {
    x.iter().map(Tangent::value).collect()
}

/// Collects derivative parts into a matrix: row `i` is the derivative of `x[i]`.
pub fn jacobian(x: &[Tangent]) -> DenseMatrix {
    let d = x.first().map_or(0, Tangent::width);
    Matrix::from_fn(x.len(), d, |i, j| x[i].derivative[j])
}

impl PartialEq for Tangent {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for Tangent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl Add for Tangent {
    type Output = Tangent;

    fn add(mut self, rhs: Tangent) -> Tangent {
        self.assert_width(&rhs);
        self.value += rhs.value;
        for (d, r) in self.derivative.iter_mut().zip(&rhs.derivative) {
            *d += r;
        }
        self
    }
}

impl Sub for Tangent {
    type Output = Tangent;

    fn sub(mut self, rhs: Tangent) -> Tangent {
        self.assert_width(&rhs);
        self.value -= rhs.value;
        for (d, r) in self.derivative.iter_mut().zip(&rhs.derivative) {
            *d -= r;
        }
        self
    }
}

impl Mul for Tangent {
    type Output = Tangent;

    fn mul(mut self, rhs: Tangent) -> Tangent {
        self.assert_width(&rhs);
        let (a, b) = (self.value, rhs.value);
        for (d, r) in self.derivative.iter_mut().zip(&rhs.derivative) {
            *d = *d * b + a * r;
        }
        self.value = a * b;
        self
    }
}

impl Div for Tangent {
    type Output = Tangent;

    fn div(mut self, rhs: Tangent) -> Tangent {
        self.assert_width(&rhs);
        let q = self.value / rhs.value;
        for (d, r) in self.derivative.iter_mut().zip(&rhs.derivative) {
            *d = (*d - q * r) / rhs.value;
        }
        self.value = q;
        self
    }
}

impl Neg for Tangent {
    type Output = Tangent;

    fn neg(mut self) -> Tangent {
        self.value = -self.value;
        self.derivative.iter_mut().for_each(|d| *d = -*d);
        self
    }
}

impl Add<f64> for Tangent {
    type Output = Tangent;

    fn add(mut self, rhs: f64) -> Tangent {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Tangent {
    type Output = Tangent;

    fn sub(mut self, rhs: f64) -> Tangent {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Tangent {
    type Output = Tangent;

    fn mul(mut self, rhs: f64) -> Tangent {
        self.value *= rhs;
        self.derivative.iter_mut().for_each(|d| *d *= rhs);
        self
    }
}

impl Div<f64> for Tangent {
    type Output = Tangent;

    fn div(mut self, rhs: f64) -> Tangent {
        self.value /= rhs;
        self.derivative.iter_mut().for_each(|d| *d /= rhs);
        self
    }
}

impl Scalar for Tangent {
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }

    fn constant_like(&self, c: f64) -> Self {
        Tangent::lift(c, self.width())
    }

    fn add_mul(&mut self, a: &Self, b: &Self) {
        for ((d, da), db) in self
            .derivative
            .iter_mut()
            .zip(&a.derivative)
            .zip(&b.derivative)
        {
            *d += da * b.value + a.value * db;
        }
        self.value += a.value * b.value;
    }

    fn sub_mul(&mut self, a: &Self, b: &Self) {
        for ((d, da), db) in self
            .derivative
            .iter_mut()
            .zip(&a.derivative)
            .zip(&b.derivative)
        {
            *d -= da * b.value + a.value * db;
        }
        self.value -= a.value * b.value;
    }

    /// One value multiply-add plus two per direction (product rule).
    fn fma_weight(&self) -> u64 {
        1 + 2 * self.width() as u64
    }
}
