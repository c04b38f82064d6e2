use std::fmt::Debug;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::rational::Rational;
use crate::error::{Error, Result};

/// Field arithmetic needed by the solvers, implemented for exact rationals
/// and for `f64`.
pub trait Scalar: Clone + Debug + PartialEq + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(n: u64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    /// Preference for `self` as a pivot; larger is better, `None` for zero.
    fn pivot_score(&self) -> Option<f64>;
    fn to_f64(&self) -> f64;
    /// Whether the scalar type rounds.
    const INEXACT: bool;
}

impl Scalar for f64 {
    const INEXACT: bool = true;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn pivot_score(&self) -> Option<f64> {
        let a = self.abs();
        (a > 0.0).then_some(a)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    const INEXACT: bool = false;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_u64(n: u64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    /// Smallest bit size wins, which keeps intermediate entries short.
    fn pivot_score(&self) -> Option<f64> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(-((self.numer().bits() + self.denom().bits()) as f64))
        }
    }
    fn to_f64(&self) -> f64 {
        super::rational::to_f64(self)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// `row(dst) -= factor * row(src)` on columns `from..`.
    fn axpy_rows(&mut self, dst: usize, src: usize, factor: &T, from: usize) {
        let (lo, hi) = if dst < src { (dst, src) } else { (src, dst) };
        let (head, tail) = self.data.split_at_mut(hi * self.cols);
        let (d, s) = if dst < src {
            (&mut head[lo * self.cols..(lo + 1) * self.cols], &tail[..self.cols])
        } else {
            (&mut tail[..self.cols], &head[lo * self.cols..(lo + 1) * self.cols])
        };
        for j in from..d.len() {
            if !s[j].is_zero() {
                d[j] = d[j].sub(&factor.mul(&s[j]));
            }
        }
    }
}

/// Solves `a · x = b` for every column of `b` by Gaussian elimination with
/// pivots chosen by [`Scalar::pivot_score`] (partial pivoting for floats).
pub fn solve_dense<T: Scalar>(mut a: Matrix<T>, mut b: Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(Error::InvalidParameter(format!(
            "shape mismatch: {}x{} matrix, {} right-hand rows",
            a.rows, a.cols, b.rows
        )));
    }
    for col in 0..n {
        let pivot = (col..n)
            .filter_map(|i| a.get(i, col).pivot_score().map(|s| (i, s)))
            .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((i, s)),
            });
        let Some((p, _)) = pivot else {
            return Err(Error::SingularSystem { column: col });
        };
        a.swap_rows(col, p);
        b.swap_rows(col, p);
        let inv = T::one().div(a.get(col, col));
        for i in col + 1..n {
            if a.get(i, col).is_zero() {
                continue;
            }
            let factor = a.get(i, col).mul(&inv);
            a.axpy_rows(i, col, &factor, col + 1);
            a.set(i, col, T::zero());
            b.axpy_rows(i, col, &factor, 0);
        }
    }
    for col in (0..n).rev() {
        let inv = T::one().div(a.get(col, col));
        for j in 0..b.cols {
            let v = b.get(col, j).mul(&inv);
            b.set(col, j, v);
        }
        for i in 0..col {
            if a.get(i, col).is_zero() {
                continue;
            }
            let factor = a.get(i, col).clone();
            b.axpy_rows(i, col, &factor, 0);
        }
    }
    Ok(b)
}

/// Solves an integer system by fraction-free (Bareiss) elimination and
/// returns the exact rational solution.
pub fn solve_bareiss(a: &[Vec<BigInt>], b: &[BigInt]) -> Result<Vec<Rational>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("system is not square".into()));
    }
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n)
            .filter(|&i| !m[i][k].is_zero())
            .min_by_key(|&i| m[i][k].bits())
            .ok_or(Error::SingularSystem { column: k })?;
        m.swap(k, p);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[k][k] * &m[i][j] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![<Rational as Zero>::zero(); n];
    for i in (0..n).rev() {
        let mut acc = Rational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            if !m[i][j].is_zero() {
                acc -= Rational::from_integer(m[i][j].clone()) * &x[j];
            }
        }
        x[i] = acc / Rational::from_integer(m[i][i].clone());
    }
    Ok(x)
}

/// Largest absolute row residual of `a · x - b`.
pub fn residual(a: &Matrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    (0..a.rows())
        .map(|i| {
            let ax: f64 = a.row(i).iter().zip(x).map(|(aij, xj)| aij * xj).sum();
            (ax - b[i]).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::rational;

    #[test]
    fn dense_float_solve() {
        let a = Matrix::from_rows(vec![vec![2.0, 1.0, -1.0], vec![-3.0, -1.0, 2.0], vec![-2.0, 1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(vec![vec![8.0], vec![-11.0], vec![-3.0]]).unwrap();
        let x = solve_dense(a.clone(), b).unwrap();
        let x: Vec<f64> = (0..3).map(|i| *x.get(i, 0)).collect();
        for (xi, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((xi - want).abs() < 1e-12);
        }
        assert!(residual(&a, &x, &[8.0, -11.0, -3.0]) < 1e-12);
    }

    #[test]
    fn dense_rational_solve_needs_pivoting() {
        let a = Matrix::from_rows(vec![
            vec![rational(0, 1), rational(1, 1)],
            vec![rational(1, 2), rational(1, 3)],
        ])
        .unwrap();
        let b = Matrix::from_rows(vec![vec![rational(2, 1), rational(0, 1)], vec![rational(1, 1), rational(1, 1)]]).unwrap();
        let x = solve_dense(a, b).unwrap();
        assert_eq!(*x.get(1, 0), rational(2, 1));
        assert_eq!(*x.get(0, 0), rational(2, 3));
        assert_eq!(*x.get(1, 1), rational(0, 1));
        assert_eq!(*x.get(0, 1), rational(2, 1));
    }

    #[test]
    fn singular_is_reported() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(solve_dense(a, b), Err(Error::SingularSystem { column: 1 })));
        let a = vec![vec![BigInt::from(1), BigInt::from(2)], vec![BigInt::from(2), BigInt::from(4)]];
        assert!(solve_bareiss(&a, &[BigInt::from(1), BigInt::from(2)]).is_err());
    }

    #[test]
    fn bareiss_matches_dense() {
        let rows = [[3i64, -1, 2], [0, 4, 1], [5, 2, -7]];
        let rhs = [1i64, -2, 3];
        let a: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        let b: Vec<BigInt> = rhs.iter().map(|&v| BigInt::from(v)).collect();
        let x = solve_bareiss(&a, &b).unwrap();
        let dense_a = Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&v| rational(v, 1)).collect()).collect()).unwrap();
        let dense_b = Matrix::from_rows(rhs.iter().map(|&v| vec![rational(v, 1)]).collect()).unwrap();
        let y = solve_dense(dense_a, dense_b).unwrap();
        for i in 0..3 {
            assert_eq!(&x[i], y.get(i, 0));
        }
    }
}
