//! Dense row-major matrices, a cyclic Jacobi symmetric eigensolver, and the
//! scalar activation functions shared by the neural modules.
//!
//! Everything here is deliberately dependency-free and deterministic: the
//! eigensolver sweeps pivots in a fixed order and canonicalizes eigenvector
//! signs, so identical inputs produce bit-identical factorizations on every
//! run and platform we target.

use crate::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · other` (i-k-j loop order for cache locality).
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Mat::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    /// `self · otherᵀ`; both operands indexed by rows, so this is a row-dot.
    pub fn matmul_tb(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul_tb shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Mat::zeros(m, n);
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                out.data[i * n + j] = dot(arow, &other.data[j * k..(j + 1) * k]);
            }
        }
        out
    }

    /// `selfᵀ · other` (rank-1 accumulation over shared rows).
    pub fn matmul_ta(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "matmul_ta shape mismatch");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Mat::zeros(k, n);
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[i * n..(i + 1) * n];
                let orow = &mut out.data[p * n..(p + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self += scale · other`.
    pub fn scaled_add(&mut self, other: &Mat, scale: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softplus `ln(1 + eˣ)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Max-shifted in-place softmax.
pub fn softmax_inplace(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, Q)` where the `i`-th column of `Q` is the unit
/// eigenvector for `eigenvalues[i]` and `A = Q · diag(λ) · Qᵀ` exactly (to
/// rounding). Pairs are ordered by `|λ|` descending (ties: larger `λ` first,
/// then original pivot order), and each eigenvector is canonicalized so its
/// largest-magnitude entry (lowest index on ties) is non-negative.
pub fn eig_symmetric(a: &Mat) -> Result<(Vec<f64>, Mat)> {
    assert_eq!(a.rows, a.cols, "eig_symmetric needs a square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let mut m = a.data.clone();
    let mut v = Mat::identity(n);
    let fro_sq: f64 = m.iter().map(|x| x * x).sum();
    if fro_sq == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let tol_sq = fro_sq * 1e-26; // stop once off-diagonal mass is ~1e-13 of ‖A‖
    const MAX_SWEEPS: usize = 64;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off_sq: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum::<f64>()
            * 2.0;
        if off_sq <= tol_sq {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Smaller-magnitude root of t² + 2θt − 1 = 0 keeps |rotation| ≤ 45°.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[p * n + k] = m[k * n + p];
                    m[k * n + q] = s * akp + c * akq;
                    m[q * n + k] = m[k * n + q];
                }
                m[p * n + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                m[q * n + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = c * vkp - s * vkq;
                    v.data[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver failed to converge for a {n}×{n} matrix"
        )));
    }

    let eigvals: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eigvals[j]
            .abs()
            .partial_cmp(&eigvals[i].abs())
            .unwrap()
            .then(eigvals[j].partial_cmp(&eigvals[i]).unwrap())
            .then(i.cmp(&j))
    });

    let mut vals = Vec::with_capacity(n);
    let mut q = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eigvals[src]);
        // Canonical sign: largest-|entry| component (lowest index on ties) ≥ 0.
        let mut pivot = 0usize;
        for k in 1..n {
            if v.data[k * n + src].abs() > v.data[pivot * n + src].abs() {
                pivot = k;
            }
        }
        let flip = if v.data[pivot * n + src] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            q.data[k * n + dst] = flip * v.data[k * n + src];
        }
    }
    Ok((vals, q))
}
