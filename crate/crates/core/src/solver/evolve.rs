use serde::{Deserialize, Serialize};

use super::OperatorHandle;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::potential::MatrixPotential;

pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Early exit once the Cauchy increment drops below this fraction of `‖u‖₂`.
const CAUCHY_STOP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-euler" => Ok(Scheme::ImplicitEuler),
            "crank-nicolson" => Ok(Scheme::CrankNicolson),
            _ => Err(Error::Config(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Approximates `e^{−tH} u0` with `steps` resolvent solves.
pub fn evolve(
    h: &OperatorHandle,
    u0: &Field,
    t: f64,
    steps: usize,
    scheme: Scheme,
    tol: f64,
) -> Result<Field> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("t must be > 0, got {t}")));
    }
    if steps == 0 {
        return Err(Error::Input("steps must be >= 1".into()));
    }
    let tau = t / steps as f64;
    let mut u = u0.clone();
    for _ in 0..steps {
        u = match scheme {
            Scheme::ImplicitEuler => {
                let rhs = u.scaled(1.0 / tau);
                h.resolvent_with(1.0 / tau, &rhs, tol, Some(&u), None)?.0
            }
            Scheme::CrankNicolson => {
                // (2/τ + H) v = (2/τ) u − H u
                let mut rhs = h.apply(&u)?.scaled(-1.0);
                rhs.axpy(2.0 / tau, &u);
                h.resolvent_with(2.0 / tau, &rhs, tol, Some(&u), None)?.0
            }
        };
    }
    Ok(u)
}

/// Implicit-Euler Dirichlet heat flow `e^{tΔ} w0` for a scalar field.
pub fn heat_scalar(g: &Grid, w0: &Field, t: f64, steps: usize, tol: f64) -> Result<Field> {
    if w0.components() != 1 {
        return Err(Error::Input("heat_scalar expects a scalar field".into()));
    }
    let h = OperatorHandle::new(*g, &MatrixPotential::zero(g.dim(), 1), 0.0)?;
    evolve(&h, w0, t, steps, Scheme::ImplicitEuler, tol)
}

#[derive(Debug, Clone)]
pub struct HomogeneousSolution {
    pub u: Field,
    /// `ε` values actually solved for, in schedule order.
    pub eps: Vec<f64>,
    /// `u_ε` for each entry of `eps`.
    pub iterates: Vec<Field>,
    /// `‖u_{ε_{j+1}} − u_{ε_j}‖₂`.
    pub increments: Vec<f64>,
}

/// Solves `H u = f` as the limit of `(H + ε)^{-1} f` along a decreasing
/// schedule. `h` must carry shift 0.
pub fn homogeneous_solve(
    h: &OperatorHandle,
    f: &Field,
    schedule: &[f64],
    tol: f64,
) -> Result<HomogeneousSolution> {
    if schedule.is_empty() {
        return Err(Error::Input("empty epsilon schedule".into()));
    }
    if schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Input(
            "epsilon schedule entries must be positive".into(),
        ));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input(
            "epsilon schedule must be strictly decreasing".into(),
        ));
    }
    let mut out = HomogeneousSolution {
        u: Field::zeros(*h.grid(), h.components()),
        eps: Vec::new(),
        iterates: Vec::new(),
        increments: Vec::new(),
    };
    for &eps in schedule {
        let (u, _) = h.resolvent_with(eps, f, tol, out.iterates.last(), None)?;
        let mut stop = false;
        if let Some(prev) = out.iterates.last() {
            let inc = u.sub(prev).l2_vec();
            out.increments.push(inc);
            stop = inc <= CAUCHY_STOP * u.l2_vec();
        }
        out.eps.push(eps);
        out.iterates.push(u);
        if stop {
            break;
        }
    }
    out.u = out.iterates.last().cloned().unwrap_or(out.u);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bump, lp_norm, Exponent};
    use crate::potential::Example1;
    use std::f64::consts::PI;

    fn ex1() -> MatrixPotential {
        MatrixPotential::example1(
            2,
            Example1 {
                alpha: 0.5,
                beta: 1.0,
                c1: 2.0,
                k: 1.0,
                k1: 3.0,
            },
            1e-3,
        )
        .unwrap()
    }

    fn sine(g: Grid, l: f64) -> Field {
        Field::from_fn(g, 1, |x, o| o[0] = (PI * (x[0] + l) / (2.0 * l)).sin())
    }

    #[test]
    fn implicit_euler_on_sine_mode() {
        let l = 1.0;
        let g = Grid::new(1, l, 40).unwrap();
        let hs = g.spacing();
        let h = OperatorHandle::new(g, &MatrixPotential::zero(1, 1), 0.0).unwrap();
        let u0 = sine(g, l);
        let lam = (2.0 / (hs * hs)) * (1.0 - (PI * hs / (2.0 * l)).cos());
        let (t, steps) = (0.2, 8);
        let tau = t / steps as f64;
        let u = evolve(&h, &u0, t, steps, Scheme::ImplicitEuler, 1e-13).unwrap();
        let want = u0.scaled((1.0 + tau * lam).powi(-(steps as i32)));
        assert!(u.sub(&want).max_abs() < 1e-10);
    }

    #[test]
    fn one_step_matches_taylor_to_second_order() {
        let g = Grid::new(2, 2.0, 24).unwrap();
        let h = OperatorHandle::new(g, &ex1(), 0.0).unwrap();
        let u0 = bump(&g, &[0.2, -0.3], 0.8, &[1.0, -0.5]).unwrap();
        let hu = h.apply(&u0).unwrap();
        let err = |t: f64, scheme| {
            let u = evolve(&h, &u0, t, 1, scheme, 1e-12).unwrap();
            let mut taylor = u0.clone();
            taylor.axpy(-t, &hu);
            u.sub(&taylor).l2_vec()
        };
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let (e1, e2) = (err(1e-4, scheme), err(5e-5, scheme));
            let rate = (e1 / e2).log2();
            assert!(rate > 1.8, "{scheme:?}: rate {rate}");
        }
    }

    #[test]
    fn implicit_euler_contracts_l2() {
        let g = Grid::new(2, 2.0, 20).unwrap();
        let h = OperatorHandle::new(g, &ex1(), 0.0).unwrap();
        let u0 = bump(&g, &[0.0, 0.5], 0.7, &[-1.0, 0.8]).unwrap();
        let u = evolve(&h, &u0, 0.1, 4, Scheme::ImplicitEuler, 1e-10).unwrap();
        assert!(u.l2_vec() <= u0.l2_vec());
    }

    #[test]
    fn heat_scalar_positive_and_mass_decreasing() {
        let g = Grid::new(2, 1.0, 24).unwrap();
        let w0 = bump(&g, &[0.1, 0.1], 0.4, &[1.0]).unwrap();
        let w = heat_scalar(&g, &w0, 0.05, 10, 1e-12).unwrap();
        assert!(w.min_value() >= -1e-12);
        let l1 = |f: &Field| lp_norm(&g, f, Exponent::Finite(1.0)).unwrap();
        assert!(l1(&w) <= l1(&w0));
        let z = heat_scalar(&g, &Field::zeros(g, 1), 0.05, 3, 1e-8).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn homogeneous_solve_zero_rhs() {
        let g = Grid::new(2, 2.0, 16).unwrap();
        let h = OperatorHandle::new(g, &ex1(), 0.0).unwrap();
        let s = homogeneous_solve(&h, &Field::zeros(g, 2), &DEFAULT_EPS_SCHEDULE, 1e-8).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
    }

    #[test]
    fn homogeneous_solve_recovers_constructed_solution() {
        let g = Grid::new(2, 2.0, 32).unwrap();
        let h = OperatorHandle::new(g, &ex1(), 0.0).unwrap();
        let w = bump(&g, &[0.3, 0.1], 0.7, &[1.0, 0.5]).unwrap();
        let f = h.apply(&w).unwrap();
        let s = homogeneous_solve(&h, &f, &DEFAULT_EPS_SCHEDULE, 1e-10).unwrap();
        assert!(s.u.sub(&w).l2_vec() <= 0.02 * w.l2_vec());
        assert!(s.increments.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn homogeneous_iterates_increase_as_eps_decreases() {
        let g = Grid::new(2, 2.0, 24).unwrap();
        let h = OperatorHandle::new(g, &ex1(), 0.0).unwrap();
        let f = bump(&g, &[-0.2, 0.4], 0.6, &[0.3, 1.0]).unwrap();
        let s = homogeneous_solve(&h, &f, &DEFAULT_EPS_SCHEDULE, 1e-10).unwrap();
        for pair in s.iterates.windows(2) {
            assert!(pair[1].sub(&pair[0]).min_value() >= -1e-8 * f.max_abs());
        }
    }

    #[test]
    fn schedule_validation() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let h = OperatorHandle::new(g, &MatrixPotential::zero(1, 1), 0.0).unwrap();
        let f = Field::zeros(g, 1);
        assert!(homogeneous_solve(&h, &f, &[], 1e-8).is_err());
        assert!(homogeneous_solve(&h, &f, &[0.1, 0.2], 1e-8).is_err());
        assert!(homogeneous_solve(&h, &f, &[0.1, -0.2], 1e-8).is_err());
    }
}
