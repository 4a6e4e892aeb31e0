//! Dense vectors and row-major matrices, activations, and initialization.

mod rng;

use std::ops::{Deref, DerefMut};

pub use rng::Rng;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<S> {
    data: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![S::zero(); dim],
        }
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        Vector { data }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Vector {
            data: values.iter().map(|&v| S::of(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn dot(&self, other: &Vector<S>) -> Result<S> {
        check_dim("dot", self.dim(), other.dim())?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> S {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Vector<T> {
        Vector {
            data: self.data.iter().map(|v| T::of(v.as_f64())).collect(),
        }
    }
}

impl<S> Deref for Vector<S> {
    type Target = [S];

    fn deref(&self) -> &[S] {
        &self.data
    }
}

impl<S> DerefMut for Vector<S> {
    fn deref_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
}

impl<S> From<Vec<S>> for Vector<S> {
    fn from(data: Vec<S>) -> Self {
        Vector { data }
    }
}

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        check_dim("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim("matrix row", cols, row.len())?;
            data.extend(row.iter().map(|&v| S::of(v)));
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: S) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[S] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · v`.
    pub fn matvec(&self, v: &Vector<S>) -> Result<Vector<S>> {
        check_dim("matvec", self.cols, v.dim())?;
        let mut out = vec![S::zero(); self.rows];
        self.matvec_into(v, &mut out);
        Ok(Vector::from_vec(out))
    }

    /// `out = self · x` without shape checks beyond debug assertions.
    pub(crate) fn matvec_into(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    /// `selfᵀ · y`, used when propagating gradients backwards.
    pub(crate) fn tmatvec(&self, y: &[S]) -> Vec<S> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![S::zero(); self.cols];
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi == S::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += yi * w;
            }
        }
        out
    }

    pub fn cast<T: Scalar>(&self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::of(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `result[i] = Σ_j m[i,j]·v[j]`.
pub fn matvec<S: Scalar>(m: &Matrix<S>, v: &Vector<S>) -> Result<Vector<S>> {
    m.matvec(v)
}

/// Glorot-uniform initialization: entries i.i.d. in `[-a, a]` with
/// `a = sqrt(6 / (rows + cols))`.
pub fn glorot_uniform_init<S: Scalar>(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix<S>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "glorot init needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::of(rng.uniform_range(-bound, bound)))
        .collect();
    Matrix::new(rows, cols, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

pub fn elementwise<S: Scalar>(v: &Vector<S>, f: Activation) -> Vector<S> {
    Vector::from_vec(v.iter().map(|&x| f.apply(x)).collect())
}

#[inline]
pub fn relu<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x
    } else {
        S::zero()
    }
}

/// Logistic sigmoid, clamped to the open interval `(0, 1)`.
///
/// In `f32` the exact value rounds to `1.0` once `x > ~17`; the clamp keeps
/// every output strictly inside the interval.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    let y = if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    };
    let upper = S::one() - S::epsilon() / S::of(2.0);
    y.max(S::min_positive_value()).min(upper)
}

/// Query-document scoring function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl Similarity {
    /// Score of `a` against `b`. Cosine against a zero vector scores 0.
    pub fn score<S: Scalar>(self, a: &[S], b: &[S]) -> S {
        let d = dot(a, b);
        match self {
            Similarity::Dot => d,
            Similarity::Cosine => {
                let denom = dot(a, a).sqrt() * dot(b, b).sqrt();
                if denom > S::zero() {
                    d / denom
                } else {
                    S::zero()
                }
            }
        }
    }
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Similarity::Dot),
            "cosine" | "cos" => Ok(Similarity::Cosine),
            other => Err(Error::invalid(format!("unknown similarity '{other}' (dot|cosine)"))),
        }
    }
}

impl std::fmt::Display for Similarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Similarity::Dot => "dot",
            Similarity::Cosine => "cosine",
        })
    }
}
