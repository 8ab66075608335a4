use crate::error::{Error, Result};

/// Dense row-major matrix. Used for policy weights and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) {
        assert_eq!(self.shape(), other.shape(), "matrix shapes differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// Adds `scale * x` to row `r`.
    pub fn add_to_row(&mut self, r: usize, x: &[f64], scale: f64) {
        for (a, b) in self.row_mut(r).iter_mut().zip(x) {
            *a += scale * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Weights of the linear-softmax policy: one row per token, one column per
/// state feature.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Matrix,
    /// Bumped on every update.
    pub version: u64,
}

impl PolicyParams {
    pub fn zeros(vocab_size: usize, feature_dim: usize) -> Self {
        Self {
            theta: Matrix::zeros(vocab_size, feature_dim),
            version: 0,
        }
    }

    pub fn new(theta: Matrix) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NumericalError("policy weights must be finite".into()));
        }
        Ok(Self { theta, version: 0 })
    }

    pub fn vocab_size(&self) -> usize {
        self.theta.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.theta.cols()
    }

    /// Logit of `token` at a state.
    pub fn logit(&self, token: usize, features: &[f64]) -> f64 {
        self.theta.row(token).iter().zip(features).map(|(w, x)| w * x).sum()
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        (0..self.vocab_size()).map(|t| self.logit(t, features)).collect()
    }
}
