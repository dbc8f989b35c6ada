//! Run configuration files.
//!
//! A config file is either a bare potential declaration (an object with a
//! `kind` key) or a full [`RunConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::{MatrixPotential, PotentialConfig};

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to the potential's dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "L", default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_half_width() -> f64 {
    2.0
}

fn default_n() -> usize {
    64
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d: None,
            half_width: default_half_width(),
            n: default_n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Overrides the default CG iteration cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    pub fn from_potential(potential: PotentialConfig) -> Self {
        Self {
            potential,
            grid: GridSpec::default(),
            solver: SolverSpec::default(),
            suite: None,
            seed: DEFAULT_SEED,
            out: None,
        }
    }

    /// Parses either form and validates the result.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let bare = value.get("kind").is_some();
        let cfg = if bare {
            let pot: PotentialConfig =
                serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
            Self::from_potential(pot)
        } else {
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.potential.dim();
        if let Some(gd) = self.grid.d {
            if gd != d {
                return Err(Error::Config(format!(
                    "grid dimension {gd} differs from potential dimension {d}"
                )));
            }
        }
        self.grid()?;
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            return Err(Error::Config(format!(
                "solver tol must lie in (0, 1), got {}",
                self.solver.tol
            )));
        }
        if self.solver.max_iter == Some(0) {
            return Err(Error::Config("solver max_iter must be >= 1".into()));
        }
        self.potential()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.potential.dim(), self.grid.half_width, self.grid.n)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// The potential with `rho_min: "auto"` resolved against the grid.
    pub fn potential(&self) -> Result<MatrixPotential> {
        let h = self.grid()?.spacing();
        MatrixPotential::from_config(&self.potential, Some(h)).map_err(|e| match e {
            Error::Config(m) | Error::Input(m) => Error::Config(m),
            other => other,
        })
    }
}
