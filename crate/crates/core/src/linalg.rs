//! Small dense symmetric eigenproblems.
//!
//! The matrices here are the `m × m` potential values at a single node, so `m`
//! is tiny (typically 1 to 4) and a cyclic Jacobi sweep is both simple and
//! accurate to a few ulps.

use crate::error::{Error, Result};

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_REL_TOL: f64 = 1e-12;

/// Eigen-decomposition of a symmetric matrix: `a = vectors · diag(values) · vectorsᵀ`.
///
/// `vectors` is row-major, column `k` is the eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub dim: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `g(A)` to `x` in place, where `g` acts on the eigenvalues.
    pub fn apply_fn(&self, x: &mut [f64], g: impl Fn(f64) -> f64) {
        let n = self.dim;
        let mut coef = vec![0.0; n];
        for (k, c) in coef.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                s += self.vectors[i * n + k] * x[i];
            }
            *c = g(self.values[k]) * s;
        }
        for (i, xi) in x.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, c) in coef.iter().enumerate() {
                s += self.vectors[i * n + k] * c;
            }
            *xi = s;
        }
    }

    /// Dense row-major `g(A)`.
    pub fn matrix_fn(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.dim;
        let gl: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[i * n + k] * gl[k] * self.vectors[j * n + k];
                }
                out[i * n + j] = s;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver for a dense symmetric row-major matrix.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `JACOBI_REL_TOL · ‖A‖_F`; fails after `JACOBI_MAX_SWEEPS` sweeps.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<SymEigen> {
    if a.len() != n * n {
        return Err(Error::Input(format!(
            "matrix has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(SymEigen {
            dim: n,
            values: vec![0.0; n],
            vectors: v,
        });
    }
    let threshold = JACOBI_REL_TOL * total;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= threshold {
            let values = (0..n).map(|i| m[i * n + i]).collect();
            return Ok(SymEigen {
                dim: n,
                values,
                vectors: v,
            });
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
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                // exact zero for the annihilated pair
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}
