//! Matrix-free `μ − Δ_h + V`, its resolvents and semigroups.
//!
//! An [`OperatorHandle`] caches the potential at every grid node. Under the
//! structural hypotheses (nonpositive off-diagonal entries, positive
//! semi-definite `V`) the assembled operator is a symmetric M-matrix, which is
//! what makes resolvents and implicit-Euler steps positivity preserving.

mod cg;
mod evolve;
mod trotter;

pub use cg::SolveStats;
pub use evolve::{
    evolve, heat_scalar, homogeneous_solve, HomogeneousSolution, Scheme, DEFAULT_EPS_SCHEDULE,
};
pub use trotter::{trotter_evolve, trotter_study, TrotterEntry, TrotterStudy};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{laplacian_block, Field, Grid};
use crate::potential::{MatrixPotential, SymMatrixValue};
use cg::{pcg, CgOutcome};

/// Immutable discrete operator `shift − Δ_h + V(x)` on a grid.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    grid: Grid,
    m: usize,
    shift: f64,
    /// Packed upper triangles, node-major.
    table: Vec<f64>,
}

impl OperatorHandle {
    pub fn new(grid: Grid, potential: &MatrixPotential, shift: f64) -> Result<Self> {
        if potential.dim() != grid.dim() {
            return Err(Error::Input(format!(
                "potential is {}-dimensional, grid is {}-dimensional",
                potential.dim(),
                grid.dim()
            )));
        }
        let m = potential.components();
        Self::from_node_fn(grid, m, shift, |x| potential.eval_unchecked(x))
    }

    /// Builds the node table from an arbitrary matrix-valued function.
    pub fn from_node_fn(
        grid: Grid,
        m: usize,
        shift: f64,
        f: impl Fn(&[f64]) -> SymMatrixValue + Sync,
    ) -> Result<Self> {
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::Input(format!("shift must be >= 0, got {shift}")));
        }
        let packed = m * (m + 1) / 2;
        let nodes = grid.node_count();
        let mut table = vec![0.0; nodes * packed];
        table
            .par_chunks_mut(packed)
            .enumerate()
            .for_each(|(k, chunk)| {
                let p = grid.point(k);
                let v = f(&p[..grid.dim()]);
                chunk.copy_from_slice(v.packed());
            });
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "potential is not finite at some grid node".into(),
            ));
        }
        Ok(Self {
            grid,
            m,
            shift,
            table,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        if !(shift >= 0.0) {
            return Err(Error::Input(format!("shift must be >= 0, got {shift}")));
        }
        Ok(Self {
            shift,
            ..self.clone()
        })
    }

    pub fn node_matrix(&self, node: usize) -> SymMatrixValue {
        let packed = self.m * (self.m + 1) / 2;
        SymMatrixValue::from_packed(
            self.m,
            self.table[node * packed..(node + 1) * packed].to_vec(),
        )
    }

    /// `(λ_V, Λ_V)` at every node.
    pub fn eigen_ranges(&self) -> Result<Vec<(f64, f64)>> {
        (0..self.grid.node_count())
            .into_par_iter()
            .map(|k| self.node_matrix(k).eigen_range())
            .collect()
    }

    /// `max Λ_V/λ_V` over the grid nodes.
    pub fn comparability(&self) -> Result<f64> {
        let ranges = self.eigen_ranges()?;
        Ok(ranges.iter().fold(1.0f64, |acc, &(lo, hi)| {
            if lo > 0.0 {
                acc.max(hi / lo)
            } else if hi > 0.0 || lo < 0.0 {
                f64::INFINITY
            } else {
                acc
            }
        }))
    }

    /// `(shift − Δ_h + V) u`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = Field::zeros(self.grid, self.m);
        self.apply_raw(0.0, u.data(), out.data_mut());
        Ok(out)
    }

    /// `V u` (nodewise matrix product only).
    pub fn potential_apply(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let mut out = Field::zeros(self.grid, self.m);
        self.add_potential(u.data(), out.data_mut());
        Ok(out)
    }

    fn check(&self, u: &Field) -> Result<()> {
        if *u.grid() != self.grid || u.components() != self.m {
            return Err(Error::Input(
                "field does not match the operator's grid".into(),
            ));
        }
        Ok(())
    }

    /// `out = (shift + extra − Δ_h + V) u` on raw component-major data.
    pub(crate) fn apply_raw(&self, extra: f64, u: &[f64], out: &mut [f64]) {
        let nodes = self.grid.node_count();
        let grid = self.grid;
        out.par_chunks_mut(nodes)
            .zip(u.par_chunks(nodes))
            .for_each(|(o, ui)| {
                laplacian_block(&grid, ui, o);
            });
        let s = self.shift + extra;
        for (o, v) in out.iter_mut().zip(u) {
            *o = s * v - *o;
        }
        self.add_potential(u, out);
    }

    fn add_potential(&self, u: &[f64], out: &mut [f64]) {
        let nodes = self.grid.node_count();
        let m = self.m;
        let packed = m * (m + 1) / 2;
        if m == 1 {
            for k in 0..nodes {
                out[k] += self.table[k] * u[k];
            }
            return;
        }
        for k in 0..nodes {
            let t = &self.table[k * packed..(k + 1) * packed];
            let mut idx = 0;
            for i in 0..m {
                for j in i..m {
                    let v = t[idx];
                    idx += 1;
                    out[i * nodes + k] += v * u[j * nodes + k];
                    if j != i {
                        out[j * nodes + k] += v * u[i * nodes + k];
                    }
                }
            }
        }
    }

    /// Diagonal of `shift + extra − Δ_h + V`, the Jacobi preconditioner.
    fn diagonal(&self, extra: f64) -> Vec<f64> {
        let nodes = self.grid.node_count();
        let h = self.grid.spacing();
        let lap = 2.0 * self.grid.dim() as f64 / (h * h);
        let m = self.m;
        let packed = m * (m + 1) / 2;
        let mut diag = vec![0.0; nodes * m];
        for c in 0..m {
            // offset of (c, c) in the packed upper triangle
            let off = c * (2 * m - c + 1) / 2;
            for k in 0..nodes {
                diag[c * nodes + k] = self.shift + extra + lap + self.table[k * packed + off];
            }
        }
        diag
    }

    /// Default CG iteration cap `20·n^{d/2}·m`.
    pub fn iteration_cap(&self) -> usize {
        let n = self.grid.n() as f64;
        (20.0 * n.powf(self.grid.dim() as f64 / 2.0) * self.m as f64).ceil() as usize
    }

    /// Solves `(μ + H) u = f`.
    pub fn resolvent(&self, mu: f64, f: &Field, tol: f64) -> Result<(Field, SolveStats)> {
        self.resolvent_with(mu, f, tol, None, None)
    }

    /// [`resolvent`](Self::resolvent) with an optional warm start and
    /// iteration cap.
    pub fn resolvent_with(
        &self,
        mu: f64,
        f: &Field,
        tol: f64,
        initial: Option<&Field>,
        max_iter: Option<usize>,
    ) -> Result<(Field, SolveStats)> {
        self.check(f)?;
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Input(format!(
                "tolerance must lie in (0, 1), got {tol}"
            )));
        }
        if !(mu >= 0.0) {
            return Err(Error::Input(format!("mu must be >= 0, got {mu}")));
        }
        if mu + self.shift <= 0.0 {
            let min_lambda = self
                .eigen_ranges()?
                .iter()
                .fold(f64::INFINITY, |a, &(lo, _)| a.min(lo));
            if !(min_lambda > 0.0) {
                return Err(Error::Input(
                    "resolvent needs mu > 0 or a potential with positive minimal eigenvalue".into(),
                ));
            }
        }
        if let Some(x0) = initial {
            self.check(x0)?;
        }
        let diag = self.diagonal(mu);
        let cap = max_iter.unwrap_or_else(|| self.iteration_cap());
        let outcome = pcg(
            |x, y| self.apply_raw(mu, x, y),
            &diag,
            f.data(),
            initial.map(|u| u.data()),
            tol,
            cap,
        );
        match outcome {
            CgOutcome::Converged(x, stats) => Ok((Field::from_vec(self.grid, self.m, x)?, stats)),
            CgOutcome::Stalled(x, stats) => Err(Error::NonConvergence {
                iterations: stats.iterations,
                residual: stats.relative_residual,
                best: Box::new(Field::from_vec(self.grid, self.m, x)?),
            }),
        }
    }
}
