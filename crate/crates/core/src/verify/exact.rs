//! Checks that are exact algebraic identities of the stencils and hold for
//! every field, independently of any solver tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{CheckResult, VerifyContext};
use crate::error::Result;
use crate::grid::{gradient_forward, laplacian_apply, Field, Grid};

/// Slack for the exact identities, relative to the natural scale of each term.
pub const EXACT_SLACK: f64 = 1e-12;

/// `count` fields with i.i.d. entries uniform in `[-1, 1]`.
pub fn random_field_set(g: &Grid, m: usize, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let data = (0..g.node_count() * m)
                .map(|_| rng.gen_range(-1.0..=1.0))
                .collect();
            Field::from_vec(*g, m, data).expect("length matches")
        })
        .collect()
}

pub fn random_fields(ctx: &VerifyContext) -> Result<Vec<Field>> {
    Ok(random_field_set(
        &ctx.grid,
        ctx.potential.components(),
        ctx.random_fields,
        ctx.seed,
    ))
}

struct Worst {
    margin: f64,
    field: usize,
    node: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            field: 0,
            node: 0,
        }
    }

    fn offer(&mut self, margin: f64, field: usize, node: usize) {
        if margin < self.margin || margin.is_nan() {
            *self = Self {
                margin,
                field,
                node,
            };
        }
    }

    fn finish(self, name: &str, fields: &[Field], extra: serde_json::Value) -> CheckResult {
        let margin = if fields.is_empty() { 0.0 } else { self.margin };
        let witness = if fields.is_empty() {
            json!(null)
        } else {
            let g = fields[self.field].grid();
            let p = g.point(self.node);
            json!({ "field": self.field, "node": self.node, "point": &p[..g.dim()] })
        };
        let mut params = json!({ "fields": fields.len() });
        if let (Some(map), serde_json::Value::Object(e)) = (params.as_object_mut(), extra) {
            map.extend(e);
        }
        CheckResult::from_margin(name, margin, EXACT_SLACK, witness, params)
    }
}

/// `Δ_h‖u‖ ≥ ⟨u, Δ_h u⟩/‖u‖` at every node where `u ≠ 0`, relative to
/// `max‖u‖/h²`.
pub fn kato_check(fields: &[Field]) -> CheckResult {
    let mut worst = Worst::new();
    for (i, u) in fields.iter().enumerate() {
        let g = *u.grid();
        let norm = u.pointwise_norm();
        let lap = laplacian_apply(&g, u).expect("same grid");
        let lap_norm = laplacian_apply(&g, &norm).expect("same grid");
        let scale = norm.max_abs() / (g.spacing() * g.spacing());
        if scale == 0.0 {
            continue;
        }
        let m = u.components();
        for k in 0..g.node_count() {
            let nk = norm.data()[k];
            if nk == 0.0 {
                continue;
            }
            let inner: f64 = (0..m).map(|c| u.at(k, c) * lap.at(k, c)).sum();
            worst.offer((lap_norm.data()[k] - inner / nk) / scale, i, k);
        }
    }
    worst.finish("kato", fields, json!({}))
}

/// `Δ_h‖u‖² − 2⟨u, Δ_h u⟩ = Σ_y ‖u(y) − u(x)‖²/h² ≥ 0`. The node margin is
/// the left side minus its deviation from the neighbor sum, relative to
/// `max‖u‖²/h²`.
pub fn subharmonic_check(fields: &[Field]) -> CheckResult {
    let mut worst = Worst::new();
    let mut identity_err = 0.0f64;
    for (i, u) in fields.iter().enumerate() {
        let g = *u.grid();
        let m = u.components();
        let sq = Field::from_vec(
            g,
            1,
            (0..g.node_count())
                .map(|k| u.node_norm(k).powi(2))
                .collect(),
        )
        .expect("length matches");
        let lap = laplacian_apply(&g, u).expect("same grid");
        let lap_sq = laplacian_apply(&g, &sq).expect("same grid");
        let h2 = g.spacing() * g.spacing();
        let scale = sq.max_abs() / h2;
        if scale == 0.0 {
            continue;
        }
        let jumps = neighbor_jump_sums(u);
        for k in 0..g.node_count() {
            let inner: f64 = (0..m).map(|c| u.at(k, c) * lap.at(k, c)).sum();
            let lhs = lap_sq.data()[k] - 2.0 * inner;
            let dev = (lhs - jumps[k] / h2).abs() / scale;
            identity_err = identity_err.max(dev);
            worst.offer(lhs / scale - dev, i, k);
        }
    }
    worst.finish(
        "subharmonic",
        fields,
        json!({ "identity_error": identity_err }),
    )
}

/// `Σ_y ‖u(y) − u(x)‖²` over the `2d` stencil neighbors, zero outside.
fn neighbor_jump_sums(u: &Field) -> Vec<f64> {
    let g = *u.grid();
    let n = g.n();
    let m = u.components();
    let mut out = vec![0.0; g.node_count()];
    for (k, o) in out.iter_mut().enumerate() {
        let idx = g.unravel(k);
        for axis in 0..g.dim() {
            let s = g.stride(axis);
            for (ok, nb) in [
                (idx[axis] > 0, k.wrapping_sub(s)),
                (idx[axis] + 1 < n, k + s),
            ] {
                for c in 0..m {
                    let y = if ok { u.at(nb, c) } else { 0.0 };
                    *o += (y - u.at(k, c)).powi(2);
                }
            }
        }
    }
    out
}

/// `‖∇_h‖u‖‖ ≤ ‖∇_h u‖` nodewise (forward differences), relative to
/// `max‖u‖/h`.
pub fn gradient_norm_check(fields: &[Field]) -> CheckResult {
    let mut worst = Worst::new();
    for (i, u) in fields.iter().enumerate() {
        let g = *u.grid();
        let norm = u.pointwise_norm();
        let scale = norm.max_abs() / g.spacing();
        if scale == 0.0 {
            continue;
        }
        let grad = gradient_forward(&g, u).expect("same grid");
        let grad_norm = gradient_forward(&g, &norm).expect("same grid");
        for k in 0..g.node_count() {
            let a: f64 = grad
                .iter()
                .map(|f| f.node_norm(k).powi(2))
                .sum::<f64>()
                .sqrt();
            let b: f64 = grad_norm
                .iter()
                .map(|f| f.data()[k].powi(2))
                .sum::<f64>()
                .sqrt();
            worst.offer((a - b) / scale, i, k);
        }
    }
    worst.finish("gradient-norm", fields, json!({}))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bump;

    #[test]
    fn random_fields_pass_all_exact_checks() {
        for d in 1..=3 {
            for m in 1..=3 {
                let g = Grid::new(d, 1.0, 8).unwrap();
                let fs = random_field_set(&g, m, 10, (d * 10 + m) as u64);
                for r in [
                    kato_check(&fs),
                    subharmonic_check(&fs),
                    gradient_norm_check(&fs),
                ] {
                    assert!(r.pass, "{} d={d} m={m}: {}", r.check, r.margin);
                }
            }
        }
    }

    #[test]
    fn scalar_nonnegative_kato_is_equality() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let u = bump(&g, &[0.1, 0.0], 0.6, &[1.0]).unwrap();
        let r = kato_check(&[u]);
        assert!(r.pass);
        assert!(r.margin.abs() < 1e-12);
    }

    #[test]
    fn one_hot_field() {
        let g = Grid::new(2, 1.0, 6).unwrap();
        let mut u = Field::zeros(g, 2);
        u.data_mut()[g.ravel(&[2, 3])] = 1.5;
        for r in [
            kato_check(&[u.clone()]),
            subharmonic_check(&[u.clone()]),
            gradient_norm_check(&[u]),
        ] {
            assert!(r.pass, "{}", r.check);
        }
    }

    #[test]
    fn jump_sum_is_zero_for_constant_interior_stencil() {
        let g = Grid::new(1, 1.0, 5).unwrap();
        let u = Field::from_vec(g, 1, vec![2.0; 5]).unwrap();
        let j = neighbor_jump_sums(&u);
        assert_eq!(&j[1..4], &[0.0, 0.0, 0.0]);
        assert_eq!(j[0], 4.0);
    }

    #[test]
    fn empty_input_passes_vacuously() {
        assert!(kato_check(&[]).pass);
    }
}
