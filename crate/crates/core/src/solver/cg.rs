//! Jacobi-preconditioned conjugate gradients for symmetric positive definite
//! operators given as closures.
//!
//! Dot products are accumulated sequentially so a solve is bit-for-bit
//! reproducible for identical inputs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `‖A x − b‖₂ / ‖b‖₂` of the returned iterate (true residual).
    pub relative_residual: f64,
    pub wall_time_ms: f64,
}

pub(crate) enum CgOutcome {
    Converged(Vec<f64>, SolveStats),
    Stalled(Vec<f64>, SolveStats),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Solves `A x = b` to `‖A x − b‖₂ ≤ tol·‖b‖₂`.
///
/// Convergence of the recurrence residual is confirmed against the true
/// residual; on disagreement the iteration restarts from the true residual.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let start = Instant::now();
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let stats = |iterations, relative_residual| SolveStats {
        iterations,
        relative_residual,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if b_norm == 0.0 {
        return CgOutcome::Converged(vec![0.0; n], stats(0, 0.0));
    }
    let target = tol * b_norm;

    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let true_residual = |x: &[f64], ax: &mut Vec<f64>, r: &mut Vec<f64>| {
        apply(x, ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        dot(r, r).sqrt()
    };

    let mut res = true_residual(&x, &mut ax, &mut r);
    let mut best = (res, x.clone());
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;

    while it < max_iter {
        if res <= target {
            let confirmed = true_residual(&x, &mut ax, &mut r);
            if confirmed <= target {
                return CgOutcome::Converged(x, stats(it, confirmed / b_norm));
            }
            // recurrence drifted: restart from the true residual
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt();
        if res < best.0 {
            best = (res, x.clone());
        }
        it += 1;
    }
    let confirmed = true_residual(&x, &mut ax, &mut r);
    if confirmed <= target {
        return CgOutcome::Converged(x, stats(it, confirmed / b_norm));
    }
    let best_res = true_residual(&best.1, &mut ax, &mut r);
    CgOutcome::Stalled(best.1, stats(it, best_res / b_norm))
}
