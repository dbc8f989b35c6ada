//! Reverse-Hölder constants of scalar weights.
//!
//! For a weight `w` and exponent `q`, the `B_q` ratio of a cube `Q` is
//! `(av_Q w^q)^{1/q} / av_Q w` (node maximum in place of the `q`-average for
//! `q = ∞`). A finite cube family only ever gives a lower bound on the true
//! `B_q` constant, so everything here is an estimate.
//!
//! Cube averages use a midpoint subgrid. Cubes close to the declared singular
//! point are split dyadically up to `depth` times before the subgrid is
//! applied, which resolves point singularities down to `side · 2^{-depth}`.
//! Divergence of the `q`-average then shows up as growth of the estimate
//! with depth; [`bq_membership_trend`] fits that growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Exponent};

/// Scalar weight `x ↦ w(x)`.
pub type Weight<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Shift fractions (in units of the cube side) for the translated centers.
const SHIFTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Slope of `log Ĉ` against `log(1/R)` below which a weight counts as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFamily {
    pub cubes: Vec<Cube>,
}

impl CubeFamily {
    /// `scales` dyadic sides `R₀·2^{-j}`, each with up to `centers` cubes:
    /// the origin-centered cube plus translates along `±(1,…,1)/√d` by
    /// `{¼, ½, 1, 2}·R`. Cubes that would leave `[-L, L]^d` are dropped.
    pub fn dyadic(
        d: usize,
        base_side: f64,
        scales: usize,
        centers: usize,
        half_width: f64,
    ) -> Result<Self> {
        if scales == 0 || centers == 0 {
            return Err(Error::Input(
                "cube family needs at least one scale and center".into(),
            ));
        }
        if !(base_side > 0.0) {
            return Err(Error::Input("cube side must be positive".into()));
        }
        let diag = 1.0 / (d as f64).sqrt();
        let mut cubes = Vec::new();
        for j in 0..scales {
            let side = base_side * 0.5f64.powi(j as i32);
            let mut offsets = vec![0.0];
            for t in SHIFTS {
                offsets.push(t);
                offsets.push(-t);
            }
            for t in offsets.into_iter().take(centers) {
                let center = vec![t * side * diag; d];
                let cube = Cube::new(center, side);
                if inside_box(&cube, half_width) {
                    cubes.push(cube);
                }
            }
        }
        if cubes.is_empty() {
            return Err(Error::Input("no cube of the family fits in the box".into()));
        }
        Ok(Self { cubes })
    }

    pub fn validate(&self, half_width: f64) -> Result<()> {
        for q in &self.cubes {
            if !(q.side > 0.0) || !inside_box(q, half_width) {
                return Err(Error::Input(format!("cube {q:?} is not inside the box")));
            }
        }
        Ok(())
    }
}

fn inside_box(q: &Cube, half_width: f64) -> bool {
    q.center
        .iter()
        .all(|c| c.abs() + 0.5 * q.side <= half_width + 1e-12)
}

/// Midpoint quadrature with dyadic refinement toward a singular point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes_per_axis: usize,
    pub singular_point: Option<Vec<f64>>,
    pub depth: u32,
}

impl Quadrature {
    pub const MIN_NODES: usize = 8;

    /// 32 nodes per axis for `d ≤ 2`, 16 for `d = 3`, refined 20 levels
    /// toward the origin.
    pub fn default_for(d: usize) -> Self {
        Self {
            nodes_per_axis: if d <= 2 { 32 } else { 16 },
            singular_point: Some(vec![0.0; d]),
            depth: 20,
        }
    }

    pub fn plain(nodes_per_axis: usize) -> Self {
        Self {
            nodes_per_axis,
            singular_point: None,
            depth: 0,
        }
    }

    /// `(∫w, ∫w^q, max w)` over the cube (`∫w^q` is 0 for `q = ∞`).
    fn integrate(&self, w: Weight<'_>, q: Exponent, cube: &Cube) -> Moments {
        let mut acc = Moments::default();
        self.integrate_into(w, q, &cube.center, cube.side, self.depth, &mut acc);
        acc
    }

    fn integrate_into(
        &self,
        w: Weight<'_>,
        q: Exponent,
        center: &[f64],
        side: f64,
        depth: u32,
        acc: &mut Moments,
    ) {
        let d = center.len();
        let near = self
            .singular_point
            .as_ref()
            .is_some_and(|p| p.iter().zip(center).all(|(a, c)| (a - c).abs() < side));
        if depth > 0 && near {
            let quarter = 0.25 * side;
            let mut child = vec![0.0; d];
            for corner in 0..(1usize << d) {
                for (k, c) in child.iter_mut().enumerate() {
                    let sign = if (corner >> k) & 1 == 1 { 1.0 } else { -1.0 };
                    *c = center[k] + sign * quarter;
                }
                self.integrate_into(w, q, &child, 0.5 * side, depth - 1, acc);
            }
            return;
        }
        let nq = self.nodes_per_axis;
        let step = side / nq as f64;
        let vol = step.powi(d as i32);
        let total = nq.pow(d as u32);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..d).rev() {
                let i = rem % nq;
                rem /= nq;
                x[k] = center[k] - 0.5 * side + (i as f64 + 0.5) * step;
            }
            let v = w(&x);
            acc.w += vol * v;
            acc.vol += vol;
            match q {
                Exponent::Finite(q) => acc.wq += vol * v.powf(q),
                Exponent::Infinity => {}
            }
            acc.max = acc.max.max(v);
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Moments {
    vol: f64,
    w: f64,
    wq: f64,
    max: f64,
}

impl Moments {
    fn ratio(&self, q: Exponent) -> Result<f64> {
        let avg = self.w / self.vol;
        if !(avg > 0.0) {
            return Err(Error::Input(format!(
                "weight average {avg:e} is not positive; not a valid weight"
            )));
        }
        let top = match q {
            Exponent::Finite(q) => (self.wq / self.vol).powf(1.0 / q),
            Exponent::Infinity => self.max,
        };
        Ok(top / avg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeRatio {
    pub side: f64,
    pub center: Vec<f64>,
    #[serde(with = "crate::serde_ext::finite_or_null")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConstant {
    pub side: f64,
    #[serde(with = "crate::serde_ext::finite_or_null")]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RHEstimate {
    pub q: Exponent,
    #[serde(with = "crate::serde_ext::finite_or_null")]
    pub constant: f64,
    pub worst_cube: Cube,
    /// Max ratio per distinct cube side, in family order.
    pub per_scale: Vec<ScaleConstant>,
    pub ratios: Vec<CubeRatio>,
}

/// Largest `B_q` ratio over the family.
pub fn bq_constant(
    weight: Weight<'_>,
    q: Exponent,
    cubes: &CubeFamily,
    quad: &Quadrature,
) -> Result<RHEstimate> {
    if quad.nodes_per_axis < Quadrature::MIN_NODES {
        return Err(Error::Input(format!(
            "quadrature needs at least {} nodes per axis",
            Quadrature::MIN_NODES
        )));
    }
    if let Exponent::Finite(qv) = q {
        if !(qv > 1.0) {
            return Err(Error::Input(format!("q must exceed 1, got {qv}")));
        }
    }
    if cubes.cubes.is_empty() {
        return Err(Error::Input("empty cube family".into()));
    }
    let ratios: Vec<f64> = cubes
        .cubes
        .par_iter()
        .map(|c| quad.integrate(weight, q, c).ratio(q))
        .collect::<Result<_>>()?;

    let mut worst = 0;
    let mut per_scale: Vec<ScaleConstant> = Vec::new();
    for (i, (cube, &r)) in cubes.cubes.iter().zip(&ratios).enumerate() {
        if r > ratios[worst] {
            worst = i;
        }
        match per_scale.iter_mut().find(|s| s.side == cube.side) {
            Some(s) => s.constant = s.constant.max(r),
            None => per_scale.push(ScaleConstant {
                side: cube.side,
                constant: r,
            }),
        }
    }
    Ok(RHEstimate {
        q,
        constant: ratios[worst],
        worst_cube: cubes.cubes[worst].clone(),
        per_scale,
        ratios: cubes
            .cubes
            .iter()
            .zip(&ratios)
            .map(|(c, &ratio)| CubeRatio {
                side: c.side,
                center: c.center.clone(),
                ratio,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Diverging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub trend: Trend,
    pub slope: f64,
    /// `(R, Ĉ(R))` per resolution scale.
    pub per_scale: Vec<ScaleConstant>,
}

/// Resolution scales `R₀·2^{-16j}`, `j = 0..count`.
pub fn default_trend_scales(base_side: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| base_side * 0.5f64.powi(16 * j as i32))
        .collect()
}

/// Empirical membership proxy. The family is fixed to cubes of side
/// `scales[0]` (origin plus eight translates); at scale `R` cubes near the
/// origin are resolved down to `R`. Fits the slope of `log Ĉ(R)` against
/// `log(1/R)` and reports bounded when it is at most [`BOUNDED_SLOPE`].
pub fn bq_membership_trend(
    weight: Weight<'_>,
    q: Exponent,
    scales: &[f64],
    d: usize,
    nodes_per_axis: usize,
) -> Result<TrendReport> {
    if scales.len() < 4 {
        return Err(Error::Input(format!(
            "trend needs at least 4 scales, got {}",
            scales.len()
        )));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) || !(scales[scales.len() - 1] > 0.0) {
        return Err(Error::Input(
            "scales must be positive and decreasing".into(),
        ));
    }
    let base = scales[0];
    let family = CubeFamily::dyadic(d, base, 1, 9, f64::INFINITY)?;
    let mut per_scale = Vec::with_capacity(scales.len());
    for &r in scales {
        let depth = (base / r).log2().round().max(0.0) as u32;
        let quad = Quadrature {
            nodes_per_axis,
            singular_point: Some(vec![0.0; d]),
            depth,
        };
        let est = bq_constant(weight, q, &family, &quad)?;
        per_scale.push(ScaleConstant {
            side: r,
            constant: est.constant,
        });
    }
    let xs: Vec<f64> = per_scale.iter().map(|s| (1.0 / s.side).ln()).collect();
    let ys: Vec<f64> = per_scale.iter().map(|s| s.constant.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    Ok(TrendReport {
        trend: if slope <= BOUNDED_SLOPE {
            Trend::Bounded
        } else {
            Trend::Diverging
        },
        slope,
        per_scale,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// `x ↦ ‖x‖^{-γ}`.
pub fn power_weight(gamma: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(-gamma)
}
