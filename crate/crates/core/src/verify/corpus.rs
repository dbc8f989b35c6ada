use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bump, Field, Grid};

/// Grid-independent description of a bump, so the same corpus can be
/// realized on a refined grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: Vec<f64>,
}

impl BumpSpec {
    pub fn realize(&self, g: &Grid) -> Result<Field> {
        bump(g, &self.center, self.radius, &self.amplitude)
    }
}

/// Bumps supported in `[-L/2, L/2]^d`: `count` with amplitudes in
/// `[-1, 1]^m` followed by `nonnegative` with amplitudes in `[0, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub half_width: f64,
    pub seed: u64,
    pub mixed: Vec<BumpSpec>,
    pub nonnegative: Vec<BumpSpec>,
}

impl Corpus {
    pub const DEFAULT_SIZE: usize = 50;
    pub const DEFAULT_NONNEGATIVE: usize = 10;

    pub fn generate(
        d: usize,
        half_width: f64,
        m: usize,
        count: usize,
        nonnegative: usize,
        seed: u64,
    ) -> Result<Self> {
        if count + nonnegative == 0 {
            return Err(Error::Input("empty corpus".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = half_width;
        let mut draw = |lo: f64| {
            let radius = rng.gen_range(l / 8.0..=l / 3.0);
            let reach = 0.5 * l - radius;
            let center = (0..d).map(|_| rng.gen_range(-reach..=reach)).collect();
            let mut amplitude: Vec<f64> = (0..m).map(|_| rng.gen_range(lo..=1.0)).collect();
            // keep every member nonzero
            if amplitude.iter().all(|a| a.abs() < 1e-3) {
                amplitude[0] = 1.0;
            }
            BumpSpec {
                center,
                radius,
                amplitude,
            }
        };
        let mixed = (0..count).map(|_| draw(-1.0)).collect();
        let nonneg = (0..nonnegative).map(|_| draw(0.0)).collect();
        Ok(Self {
            half_width,
            seed,
            mixed,
            nonnegative: nonneg,
        })
    }

    /// All members, mixed-sign first.
    pub fn specs(&self) -> impl Iterator<Item = &BumpSpec> {
        self.mixed.iter().chain(&self.nonnegative)
    }

    pub fn len(&self) -> usize {
        self.mixed.len() + self.nonnegative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn realize_all(&self, g: &Grid) -> Result<Vec<Field>> {
        self.specs().map(|s| s.realize(g)).collect()
    }

    pub fn realize_nonnegative(&self, g: &Grid) -> Result<Vec<Field>> {
        self.nonnegative.iter().map(|s| s.realize(g)).collect()
    }

    pub fn realize_mixed(&self, g: &Grid) -> Result<Vec<Field>> {
        self.mixed.iter().map(|s| s.realize(g)).collect()
    }
}
