//! Minimal dense linear algebra shared by the solvers and dictionaries.
//!
//! The solver works over both real and complex measurements, so the matrix
//! type and the BPDN/least-squares routines are generic over [`Scalar`].
//! Storage is column-major: the hot operations are adjoint-times-vector
//! (one pass over every column) and sparse column updates.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// Scalar field abstraction covering `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn modulus_sq(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn div(self, rhs: Self) -> Self;
    fn from_re(re: f64) -> Self;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sq(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn div(self, rhs: Self) -> Self {
        self / rhs
    }
    fn from_re(re: f64) -> Self {
        re
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn div(self, rhs: Self) -> Self {
        self / rhs
    }
    fn from_re(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Build entrywise from `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.rows + i] = v;
    }

    /// `A x` (dense input).
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        let mut out = vec![T::zero(); self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                self.add_scaled_col(j, xj, &mut out);
            }
        }
        out
    }

    /// `out += w * col_j`.
    pub fn add_scaled_col(&self, j: usize, w: T, out: &mut [T]) {
        for (o, &a) in out.iter_mut().zip(self.col(j)) {
            *o = *o + a * w;
        }
    }

    /// `Aᴴ r` into a reused buffer.
    pub fn adjoint_vec_into(&self, r: &[T], out: &mut Vec<T>) {
        assert_eq!(r.len(), self.rows);
        out.clear();
        out.reserve(self.cols);
        for j in 0..self.cols {
            out.push(dot_conj(self.col(j), r));
        }
    }

    pub fn adjoint_vec(&self, r: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        self.adjoint_vec_into(r, &mut out);
        out
    }

    pub fn col_norms_sq(&self) -> Vec<f64> {
        (0..self.cols).map(|j| norm_sq(self.col(j))).collect()
    }
}

/// `Σ conj(a_i) b_i`.
pub fn dot_conj<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&ai, &bi) in a.iter().zip(b) {
        acc = acc + ai.conj() * bi;
    }
    acc
}

/// Squared Euclidean norm.
pub fn norm_sq<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|&x| x.modulus_sq()).sum()
}
