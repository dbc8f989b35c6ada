//! Lie–Trotter splitting of `H_{ε,M}` into the diagonal Schrödinger part
//! `H̃_ε = −Δ_h + diag(v_ii + ε)` and the bounded coupling `Ṽ_M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evolve::{evolve, Scheme};
use super::OperatorHandle;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::SymEigen;
use crate::potential::{MatrixPotential, SymMatrixValue};

/// Crank–Nicolson steps for the reference solution of [`trotter_study`].
const REFERENCE_STEPS: usize = 4096;

struct Split {
    diagonal: OperatorHandle,
    coupling: Vec<SymEigen>,
}

fn split(g: &Grid, pot: &MatrixPotential, eps: f64, m_cap: u32) -> Result<Split> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Input(format!("eps must be > 0, got {eps}")));
    }
    if m_cap == 0 {
        return Err(Error::Input("M must be >= 1".into()));
    }
    if pot.dim() != g.dim() {
        return Err(Error::Input("potential and grid dimensions differ".into()));
    }
    let m = pot.components();
    let cap = -(m_cap as f64);
    let diagonal = OperatorHandle::from_node_fn(*g, m, 0.0, |x| {
        let v = pot.eval_unchecked(x);
        let mut out = SymMatrixValue::zeros(m);
        for i in 0..m {
            out.set(i, i, v.get(i, i) + eps);
        }
        out
    })?;
    let coupling = (0..g.node_count())
        .into_par_iter()
        .map(|k| {
            let p = g.point(k);
            let v = pot.eval_unchecked(&p[..g.dim()]);
            let mut c = SymMatrixValue::zeros(m);
            for i in 0..m {
                for j in (i + 1)..m {
                    c.set(i, j, v.get(i, j).max(cap));
                }
            }
            c.eigen()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Split { diagonal, coupling })
}

fn apply_coupling(coupling: &[SymEigen], tau: f64, u: &mut Field) {
    let nodes = u.grid().node_count();
    let m = u.components();
    if m == 1 {
        return;
    }
    let mut buf = vec![0.0; m];
    for (k, eig) in coupling.iter().enumerate() {
        for c in 0..m {
            buf[c] = u.data()[c * nodes + k];
        }
        eig.apply_fn(&mut buf, |lam| (-tau * lam).exp());
        for c in 0..m {
            u.data_mut()[c * nodes + k] = buf[c];
        }
    }
}

/// `(S(τ) e^{−τṼ_M})^n f` with `τ = t/n` and `S(τ)` one implicit-Euler step
/// of `H̃_ε`.
#[allow(clippy::too_many_arguments)]
pub fn trotter_evolve(
    g: &Grid,
    pot: &MatrixPotential,
    eps: f64,
    m_cap: u32,
    f: &Field,
    t: f64,
    n_substeps: usize,
    tol: f64,
) -> Result<Field> {
    let s = split(g, pot, eps, m_cap)?;
    run(&s, f, t, n_substeps, tol)
}

fn run(s: &Split, f: &Field, t: f64, n: usize, tol: f64) -> Result<Field> {
    if n == 0 {
        return Err(Error::Input("n_substeps must be >= 1".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("t must be > 0, got {t}")));
    }
    if *f.grid() != *s.diagonal.grid() || f.components() != s.diagonal.components() {
        return Err(Error::Input("field does not match grid/potential".into()));
    }
    let tau = t / n as f64;
    let mut u = f.clone();
    for _ in 0..n {
        apply_coupling(&s.coupling, tau, &mut u);
        u = evolve(&s.diagonal, &u, tau, 1, Scheme::ImplicitEuler, tol)?;
    }
    Ok(u)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrotterEntry {
    pub n: usize,
    /// `‖trotter(n) − reference‖₂ / ‖f‖₂`.
    pub total_error: f64,
    /// `‖trotter(n) − implicit_euler(H_{ε,M}, n)‖₂ / ‖f‖₂`.
    pub splitting_error: f64,
    /// `‖implicit_euler(H_{ε,M}, n) − reference‖₂ / ‖f‖₂`.
    pub stepping_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrotterStudy {
    pub reference_steps: usize,
    pub entries: Vec<TrotterEntry>,
}

/// Compares Trotter products against a fine Crank–Nicolson evolution of
/// `H_{ε,M}` and separates splitting from time-stepping error.
#[allow(clippy::too_many_arguments)]
pub fn trotter_study(
    g: &Grid,
    pot: &MatrixPotential,
    eps: f64,
    m_cap: u32,
    f: &Field,
    t: f64,
    ns: &[usize],
    tol: f64,
) -> Result<TrotterStudy> {
    let s = split(g, pot, eps, m_cap)?;
    let full = OperatorHandle::new(*g, &pot.truncate_eps_m(eps, m_cap)?, 0.0)?;
    let reference = evolve(&full, f, t, REFERENCE_STEPS, Scheme::CrankNicolson, tol)?;
    let f_norm = f.l2_vec();
    if f_norm == 0.0 {
        return Err(Error::Degenerate("initial datum is zero".into()));
    }
    let entries = ns
        .par_iter()
        .map(|&n| {
            let tr = run(&s, f, t, n, tol)?;
            let ie = evolve(&full, f, t, n, Scheme::ImplicitEuler, tol)?;
            Ok(TrotterEntry {
                n,
                total_error: tr.sub(&reference).l2_vec() / f_norm,
                splitting_error: tr.sub(&ie).l2_vec() / f_norm,
                stepping_error: ie.sub(&reference).l2_vec() / f_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrotterStudy {
        reference_steps: REFERENCE_STEPS,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bump;
    use crate::potential::Example1;

    #[test]
    fn scalar_trotter_is_plain_evolution() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let pot = MatrixPotential::diagonal_power(1, 1, 0.5, 1e-3).unwrap();
        let f = bump(&g, &[0.2], 0.8, &[1.0]).unwrap();
        let h = OperatorHandle::new(g, &pot.truncate_eps_m(0.1, 1).unwrap(), 0.0).unwrap();
        for n in [1, 3, 8] {
            let a = trotter_evolve(&g, &pot, 0.1, 1, &f, 0.05, n, 1e-12).unwrap();
            let b = evolve(&h, &f, 0.05, n, Scheme::ImplicitEuler, 1e-12).unwrap();
            assert!(a.sub(&b).max_abs() < 1e-10);
        }
    }

    #[test]
    fn commuting_constant_potential_matches_dense_exponential() {
        // V constant with equal diagonal: factors commute, so the split is
        // exact up to the implicit-Euler step of −Δ + a.
        let g = Grid::new(1, 1.0, 6).unwrap();
        let (a, b) = (2.0, -0.7);
        let mut v = SymMatrixValue::zeros(2);
        v.set(0, 0, a);
        v.set(1, 1, a);
        v.set(0, 1, b);
        let pot = MatrixPotential::constant(1, v);
        let f = Field::from_fn(g, 2, |x, o| {
            o[0] = 1.0 - x[0] * x[0];
            o[1] = 0.5 * x[0];
        });
        let (eps, t, n) = (0.1, 0.3, 5);
        let got = trotter_evolve(&g, &pot, eps, 4, &f, t, n, 1e-13).unwrap();

        // dense oracle: [(I + τ(−Δ + a + ε))^{-1} ⊗ I] · [I ⊗ exp(−τ b σ_x)]
        let nn = g.n();
        let hs = g.spacing();
        let tau = t / n as f64;
        let mut lap = nalgebra::DMatrix::<f64>::zeros(nn, nn);
        for i in 0..nn {
            lap[(i, i)] = 2.0 / (hs * hs) + a + eps;
            if i > 0 {
                lap[(i, i - 1)] = -1.0 / (hs * hs);
            }
            if i + 1 < nn {
                lap[(i, i + 1)] = -1.0 / (hs * hs);
            }
        }
        let step = (nalgebra::DMatrix::identity(nn, nn) + lap * tau)
            .try_inverse()
            .unwrap();
        let (ch, sh) = ((tau * b).cosh(), (tau * b).sinh());
        let mut u0 = nalgebra::DVector::from_column_slice(f.component(0));
        let mut u1 = nalgebra::DVector::from_column_slice(f.component(1));
        for _ in 0..n {
            let (w0, w1) = (&u0 * ch - &u1 * sh, &u1 * ch - &u0 * sh);
            u0 = &step * w0;
            u1 = &step * w1;
        }
        for i in 0..nn {
            assert!((got.at(i, 0) - u0[i]).abs() < 1e-11);
            assert!((got.at(i, 1) - u1[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn study_errors_shrink_with_n() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let pot = MatrixPotential::example1(
            1,
            Example1 {
                alpha: 0.5,
                beta: 1.0,
                c1: 2.0,
                k: 1.0,
                k1: 3.0,
            },
            1e-3,
        )
        .unwrap();
        let f = bump(&g, &[0.1], 0.9, &[1.0, -0.6]).unwrap();
        let st = trotter_study(&g, &pot, 0.1, 1, &f, 0.05, &[4, 8, 16], 1e-12).unwrap();
        let e: Vec<f64> = st.entries.iter().map(|x| x.total_error).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let pot = MatrixPotential::zero(1, 2);
        let f = Field::zeros(g, 2);
        assert!(trotter_evolve(&g, &pot, 0.0, 1, &f, 0.1, 2, 1e-8).is_err());
        assert!(trotter_evolve(&g, &pot, 0.1, 0, &f, 0.1, 2, 1e-8).is_err());
        assert!(trotter_evolve(&g, &pot, 0.1, 1, &f, 0.1, 0, 1e-8).is_err());
    }
}
