//! Dense vector and matrix kernels, LU factorization with partial pivoting,
//! and multiply-add accounting.
//!
//! All kernels are generic over [`Scalar`] so the same code runs on plain
//! `f64` and on [`Tangent`](crate::tangent::Tangent) numbers. Every kernel
//! takes an explicit [`FlopCounter`] and charges it analytically, weighted by
//! the per-operation cost of the scalar type.

use std::fmt;
use std::ops::{Add, Deref, Div, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Relative pivot threshold. A pivot with `|p| < PIVOT_TOLERANCE * max|A|`
/// is treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Number type the kernels, ODE systems and integrator are generic over.
///
/// Orderings and norms only ever look at [`Scalar::value`]; derivative parts
/// are carried along but never influence control flow.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Primal value.
    fn value(&self) -> f64;

    /// A constant with the same shape as `self` (zero derivative part).
    fn constant_like(&self, c: f64) -> Self;

    /// `self += a * b` in place.
    fn add_mul(&mut self, a: &Self, b: &Self);

    /// `self -= a * b` in place.
    fn sub_mul(&mut self, a: &Self, b: &Self);

    /// Multiply-adds charged for one fused operation on this type.
    fn fma_weight(&self) -> u64;
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }

    #[inline]
    fn constant_like(&self, c: f64) -> Self {
        c
    }

    #[inline]
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += *a * *b;
    }

    #[inline]
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= *a * *b;
    }

    #[inline]
    fn fma_weight(&self) -> u64 {
        1
    }
}

/// Counts of floating-point work, kept in an explicit measurement scope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopCounter {
    pub multiply_adds: u64,
    pub solves: u64,
    pub factorizations: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds another counter's totals into this one.
    pub fn merge(&mut self, other: &FlopCounter) {
        self.multiply_adds += other.multiply_adds;
        self.solves += other.solves;
        self.factorizations += other.factorizations;
    }

    /// Work done since `earlier` was taken from this same scope.
    pub fn since(&self, earlier: &FlopCounter) -> FlopCounter {
        FlopCounter {
            multiply_adds: self.multiply_adds - earlier.multiply_adds,
            solves: self.solves - earlier.solves,
            factorizations: self.factorizations - earlier.factorizations,
        }
    }
}

/// Dense real vector holding an ODE state. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("state vector must not be empty".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(StateVector(entries))
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        StateVector(vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Plain real matrix.
pub type DenseMatrix = Matrix<f64>;

impl<T> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<T>
    where
        T: Clone,
    {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn transpose(&self) -> DenseMatrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

fn weight_of<T: Scalar>(items: &[T]) -> u64 {
    items.first().map_or(1, Scalar::fma_weight)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `A·x`. Charges `rows·cols` multiply-adds.
pub fn mat_vec<T: Scalar>(a: &Matrix<T>, x: &[T], flops: &mut FlopCounter) -> Result<Vec<T>> {
    check_dim(a.cols, x.len())?;
    let mut y = Vec::with_capacity(a.rows);
    for i in 0..a.rows {
        let row = a.row(i);
        let mut acc = row[0].constant_like(0.0);
        for (aij, xj) in row.iter().zip(x) {
            acc.add_mul(aij, xj);
        }
        y.push(acc);
    }
    flops.multiply_adds += (a.rows * a.cols) as u64 * weight_of(&a.data);
    Ok(y)
}

/// `A·B`. Charges `rows(A)·cols(A)·cols(B)` multiply-adds.
pub fn mat_mat<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    flops: &mut FlopCounter,
) -> Result<Matrix<T>> {
    check_dim(a.cols, b.rows)?;
    let zero = a.data[0].constant_like(0.0);
    let mut c = Matrix {
        rows: a.rows,
        cols: b.cols,
        data: vec![zero; a.rows * b.cols],
    };
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = &a[(i, k)];
            for j in 0..b.cols {
                let bkj = &b[(k, j)];
                c.data[i * b.cols + j].add_mul(aik, bkj);
            }
        }
    }
    flops.multiply_adds += (a.rows * a.cols * b.cols) as u64 * weight_of(&a.data);
    Ok(c)
}

/// Euclidean norm of the value parts.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.value() * v.value()).sum::<f64>().sqrt()
}

/// Packed `P·A = L·U` factors: unit lower `L` below the diagonal, `U` on and
/// above it. `perm[i]` is the row of `A` that ended up in row `i`.
#[derive(Clone, Debug)]
pub struct LuFactors<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn packed(&self) -> &Matrix<T> {
        &self.lu
    }

    /// Unit lower triangular factor.
    pub fn lower(&self) -> Matrix<T> {
        let z = self.lu.data[0].constant_like(0.0);
        Matrix::from_fn(self.dim(), self.dim(), |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[(i, j)].clone(),
            std::cmp::Ordering::Equal => z.constant_like(1.0),
            std::cmp::Ordering::Less => z.clone(),
        })
    }

    /// Upper triangular factor.
    pub fn upper(&self) -> Matrix<T> {
        let z = self.lu.data[0].constant_like(0.0);
        Matrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i <= j {
                self.lu[(i, j)].clone()
            } else {
                z.clone()
            }
        })
    }

    /// Solves `A·x = b`. Charges `n²` multiply-adds and one solve.
    pub fn solve(&self, b: &[T], flops: &mut FlopCounter) -> Result<Vec<T>> {
        let n = self.dim();
        check_dim(n, b.len())?;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 1..n {
            let (head, tail) = x.split_at_mut(i);
            let xi = &mut tail[0];
            for (j, xj) in head.iter().enumerate() {
                xi.sub_mul(&self.lu[(i, j)], xj);
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = x.split_at_mut(i + 1);
            let xi = &mut head[i];
            for (k, xj) in tail.iter().enumerate() {
                xi.sub_mul(&self.lu[(i, i + 1 + k)], xj);
            }
            *xi = xi.clone() / self.lu[(i, i)].clone();
        }
        flops.multiply_adds += (n * n) as u64 * weight_of(&self.lu.data);
        flops.solves += 1;
        Ok(x)
    }

    /// Solves `A·X = B` column by column.
    pub fn solve_multi(&self, b: &Matrix<T>, flops: &mut FlopCounter) -> Result<Matrix<T>> {
        check_dim(self.dim(), b.rows)?;
        let columns = (0..b.cols)
            .map(|j| self.solve(&b.column(j), flops))
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_fn(b.rows, b.cols, |i, j| {
            columns[j][i].clone()
        }))
    }
}

/// LU factorization with partial (row) pivoting.
///
/// Charges `(n³ − n)/3` multiply-adds (one per multiplier division and one per
/// elimination update) and one factorization.
pub fn lu_factor<T: Scalar>(a: &Matrix<T>, flops: &mut FlopCounter) -> Result<LuFactors<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            found: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.value().abs()));
    let threshold = PIVOT_TOLERANCE * scale;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (p, pmax) =
            (k..n)
                .map(|i| (i, lu[(i, k)].value().abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pmax == 0.0 || pmax < threshold || !pmax.is_finite() {
            return Err(Error::SingularMatrix {
                column: k,
                pivot: pmax,
            });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)].clone();
        for i in k + 1..n {
            let l = lu[(i, k)].clone() / pivot.clone();
            for j in k + 1..n {
                let (upper, lower) = lu.data.split_at_mut(i * n);
                lower[j].sub_mul(&l, &upper[k * n + j]);
            }
            lu[(i, k)] = l;
        }
    }

    let nn = n as u64;
    flops.multiply_adds += (nn * nn * nn - nn) / 3 * weight_of(&a.data);
    flops.factorizations += 1;
    Ok(LuFactors { lu, perm })
}

/// Convenience: `lu_factor(A)` followed by one solve.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T], flops: &mut FlopCounter) -> Result<Vec<T>> {
    lu_factor(a, flops)?.solve(b, flops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn mat_vec_examples() {
        let mut f = FlopCounter::new();
        let y = mat_vec(&DenseMatrix::identity(2), &[3.0, 4.0], &mut f).unwrap();
        assert_eq!(y, vec![3.0, 4.0]);
        assert_eq!(f.multiply_adds, 4);

        let j = m(&[&[0.6, -0.5], &[0.25, -0.5]]);
        let y = mat_vec(&j, &[1.0, 1.0], &mut f).unwrap();
        assert!((y[0] - 0.1).abs() < 1e-15);
        assert!((y[1] + 0.25).abs() < 1e-15);

        let y = mat_vec(&j, &[0.0, 0.0], &mut f).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
        assert_eq!(f.multiply_adds, 12);
    }

    #[test]
    fn mat_vec_dimension_mismatch() {
        let mut f = FlopCounter::new();
        let err = mat_vec(&DenseMatrix::identity(2), &[1.0, 2.0, 3.0], &mut f).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        ));
        assert_eq!(f, FlopCounter::new());
    }

    #[test]
    fn mat_mat_examples() {
        let mut f = FlopCounter::new();
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let i = DenseMatrix::identity(2);
        assert_eq!(mat_mat(&i, &b, &mut f).unwrap(), b);
        assert_eq!(mat_mat(&b, &i, &mut f).unwrap(), b);
        let c = mat_mat(
            &m(&[&[1.0, 1.0], &[0.0, 1.0]]),
            &m(&[&[1.0, 0.0], &[1.0, 1.0]]),
            &mut f,
        )
        .unwrap();
        assert_eq!(c, m(&[&[2.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(f.multiply_adds, 24);
        assert!(mat_mat(&i, &DenseMatrix::identity(3), &mut f).is_err());
    }

    #[test]
    fn factor_identity() {
        let mut f = FlopCounter::new();
        let lu = lu_factor(&DenseMatrix::identity(3), &mut f).unwrap();
        assert_eq!(lu.lower(), DenseMatrix::identity(3));
        assert_eq!(lu.upper(), DenseMatrix::identity(3));
        assert_eq!(lu.permutation(), &[0, 1, 2]);
        assert_eq!(f.factorizations, 1);
        assert_eq!(f.multiply_adds, (27 - 3) / 3);
    }

    #[test]
    fn factor_needs_pivoting() {
        let mut f = FlopCounter::new();
        let lu = lu_factor(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &mut f).unwrap();
        assert_eq!(lu.permutation(), &[1, 0]);
        let x = lu.solve(&[2.0, 3.0], &mut f).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn factor_rank_one_is_singular() {
        let mut f = FlopCounter::new();
        let err = lu_factor(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &mut f).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { column: 1, .. }));
        assert!(lu_factor(&DenseMatrix::zeros(2, 2), &mut f).is_err());
    }

    #[test]
    fn factor_rejects_non_square() {
        let mut f = FlopCounter::new();
        assert!(lu_factor(&DenseMatrix::zeros(2, 3), &mut f).is_err());
    }

    #[test]
    fn solve_examples() {
        let mut f = FlopCounter::new();
        let lu = lu_factor(&DenseMatrix::identity(2), &mut f).unwrap();
        assert_eq!(lu.solve(&[5.0, -1.0], &mut f).unwrap(), vec![5.0, -1.0]);
        let lu = lu_factor(&m(&[&[2.0, 0.0], &[0.0, 4.0]]), &mut f).unwrap();
        assert_eq!(lu.solve(&[2.0, 4.0], &mut f).unwrap(), vec![1.0, 1.0]);
        assert_eq!(f.solves, 2);
        assert!(lu.solve(&[1.0], &mut f).is_err());
    }

    #[test]
    fn solve_multi_examples() {
        let mut f = FlopCounter::new();
        let b = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let lu = lu_factor(&DenseMatrix::identity(2), &mut f).unwrap();
        assert_eq!(lu.solve_multi(&b, &mut f).unwrap(), b);

        let a = m(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -1.0], &[0.2, -0.7, 5.0]]);
        let lu = lu_factor(&a, &mut f).unwrap();
        let before = f;
        let inv = lu.solve_multi(&DenseMatrix::identity(3), &mut f).unwrap();
        assert_eq!(f.since(&before).multiply_adds, 27);
        assert_eq!(f.since(&before).solves, 3);
        let prod = mat_mat(&a, &inv, &mut f).unwrap();
        assert!(prod.max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
        let id = lu.solve_multi(&a, &mut f).unwrap();
        assert!(id.max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn factors_reproduce_input() {
        let a = m(&[&[1.0, 3.0, 2.0], &[4.0, -1.0, 0.5], &[-2.0, 0.3, 7.0]]);
        let mut f = FlopCounter::new();
        let lu = lu_factor(&a, &mut f).unwrap();
        let prod = mat_mat(&lu.lower(), &lu.upper(), &mut f).unwrap();
        let pa = Matrix::from_fn(3, 3, |i, j| a[(lu.permutation()[i], j)]);
        assert!(prod.max_abs_diff(&pa) <= 1e-12 * a.max_abs());
        for i in 0..3 {
            assert!(lu.upper()[(i, i)].abs() > PIVOT_TOLERANCE * a.max_abs());
        }
    }

    #[test]
    fn norm2_examples() {
        assert_eq!(norm2::<f64>(&[0.0, 0.0]), 0.0);
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2(&[1.0, 1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn state_vector_rejects_non_finite() {
        assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(StateVector::new(vec![]).is_err());
        assert_eq!(StateVector::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }
}
