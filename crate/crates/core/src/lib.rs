//! Finite-difference discretization of the vector-valued Schrödinger operator
//! `-Δ + V` with symmetric matrix potentials, and a harness that measures the
//! positivity, domination, reverse-Hölder and maximal-regularity properties of
//! the discrete operator.
//!
//! Module map:
//!
//! * [`potential`]: matrix potentials, eigenvalue ranges, hypothesis checks and
//!   the truncation ladder `V_ε`, `V_{ε,M}`, `V_{ε,M,N}`.
//! * [`rh`]: reverse-Hölder `B_q` constant estimates for scalar weights.
//! * [`grid`]: tensor grids, vector fields, stencils, norms and bump functions.
//! * [`svf`]: the `SVF1` binary field format and CSV slice export.
//! * [`solver`]: matrix-free `μ - Δ_h + V`, conjugate gradients, semigroups and
//!   the Trotter product.
//! * [`verify`]: inequality checks returning [`verify::CheckResult`]s, grouped
//!   into suites.

pub mod config;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod potential;
pub mod rh;
mod serde_ext;
pub mod solver;
pub mod svf;
pub mod verify;

pub use config::{GridSpec, RunConfig, SolverSpec};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use potential::{HypothesisReport, MatrixPotential, SymMatrixValue};
pub use solver::{OperatorHandle, SolveStats};
pub use verify::{CheckResult, Report};
