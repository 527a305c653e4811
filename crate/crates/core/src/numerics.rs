//! Dense row-major linear algebra and the elementwise primitives the model is
//! built from, each paired with its exact backward rule.
//!
//! Everything is `f64`. Vectors are plain `Vec<f64>` / `&[f64]`; matrices are
//! the [`Matrix`] type below. Batching is done by looping over examples, so the
//! only product needed is matrix-times-vector (and its transpose for
//! backpropagation).

use crate::error::{check_dim, Error, Result};

pub type Vector = Vec<f64>;

/// Dense row-major matrix.
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
        check_dim("Matrix::from_vec", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim("Matrix::from_rows", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `out += self · x`. Shapes are the caller's responsibility.
    #[inline]
    pub(crate) fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · g`.
    #[inline]
    pub(crate) fn matvec_t_acc(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&gi, row) in g.iter().zip(self.data.chunks_exact(self.cols)) {
            if gi != 0.0 {
                axpy(gi, row, out);
            }
        }
    }

    /// `self += g ⊗ x` (the weight gradient of `self · x`).
    #[inline]
    pub(crate) fn outer_acc(&mut self, g: &[f64], x: &[f64]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols;
        for (&gi, row) in g.iter().zip(self.data.chunks_exact_mut(cols)) {
            if gi != 0.0 {
                axpy(gi, x, row);
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Matrix-vector product `A · x`.
pub fn matmul(a: &Matrix, x: &[f64]) -> Result<Vector> {
    check_dim("matmul", a.cols, x.len())?;
    let mut out = vec![0.0; a.rows];
    a.matvec_acc(x, &mut out);
    Ok(out)
}

/// Backward rule of [`matmul`]: given `g = ∂L/∂(A·x)` returns `(∂L/∂A, ∂L/∂x)`.
pub fn matmul_backward(a: &Matrix, x: &[f64], g: &[f64]) -> Result<(Matrix, Vector)> {
    check_dim("matmul_backward", a.cols, x.len())?;
    check_dim("matmul_backward", a.rows, g.len())?;
    let mut ga = Matrix::zeros(a.rows, a.cols);
    ga.outer_acc(g, x);
    let mut gx = vec![0.0; a.cols];
    a.matvec_t_acc(g, &mut gx);
    Ok((ga, gx))
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &[f64]) -> Vector {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

pub fn tanh(x: &[f64]) -> Vector {
    x.iter().map(|v| v.tanh()).collect()
}

/// Given the sigmoid *output* `y` and upstream `g`, the gradient w.r.t. the input.
pub fn sigmoid_backward(y: &[f64], g: &[f64]) -> Vector {
    y.iter().zip(g).map(|(y, g)| g * y * (1.0 - y)).collect()
}

/// Given the tanh *output* `y` and upstream `g`, the gradient w.r.t. the input.
pub fn tanh_backward(y: &[f64], g: &[f64]) -> Vector {
    y.iter().zip(g).map(|(y, g)| g * (1.0 - y * y)).collect()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vector = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `log softmax`, computed as `l - max - ln Σ exp(l - max)`.
pub fn log_softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

/// Backward rule of [`softmax`] given its output `p` and upstream `g`.
pub fn softmax_backward(p: &[f64], g: &[f64]) -> Vector {
    let inner = dot(p, g);
    p.iter().zip(g).map(|(p, g)| p * (g - inner)).collect()
}

/// Cross-entropy of `softmax(logits)` against `target`, with its gradient
/// `softmax(logits) - onehot(target)`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vector)> {
    if target >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "target {target} out of range for {} logits",
            logits.len()
        )));
    }
    let mut grad = softmax(logits);
    let loss = -log_softmax(logits)[target];
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Central finite-difference gradient of `f` at `params`.
pub fn finite_difference_gradient<F>(mut f: F, params: &[f64], epsilon: f64) -> Vector
where
    F: FnMut(&[f64]) -> f64,
{
    let mut theta = params.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = theta[i];
            theta[i] = orig + epsilon;
            let plus = f(&theta);
            theta[i] = orig - epsilon;
            let minus = f(&theta);
            theta[i] = orig;
            (plus - minus) / (2.0 * epsilon)
        })
        .collect()
}

/// Relative error between an analytic and a numeric derivative. The
/// denominator is floored at `1e-6` so that coordinates whose true gradient is
/// essentially zero are judged by absolute error instead of amplified noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

pub(crate) fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
