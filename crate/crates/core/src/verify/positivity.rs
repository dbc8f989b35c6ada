//! Positivity, monotonicity, contraction and domination of resolvents and
//! semigroups. Slack is `10·tol` relative to the data scale named per check.

use rayon::prelude::*;
use serde_json::json;

use super::exact::random_field_set;
use super::{CheckResult, Corpus, VerifyContext};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Exponent, Field};
use crate::solver::{evolve, heat_scalar, OperatorHandle, Scheme};

/// Worst `(margin, member, node, component)` over per-member results.
fn reduce(per_member: Vec<(f64, usize, usize)>) -> (f64, serde_json::Value) {
    let mut best = (f64::INFINITY, json!(null));
    for (i, (margin, node, comp)) in per_member.into_iter().enumerate() {
        if margin < best.0 || margin.is_nan() {
            best = (
                margin,
                json!({ "member": i, "node": node, "component": comp }),
            );
        }
    }
    if best.0 == f64::INFINITY {
        best.0 = 0.0;
    }
    best
}

/// Minimum entry of `a − b` relative to `scale`, with its location.
fn min_diff(a: &Field, b: Option<&Field>, scale: f64) -> (f64, usize, usize) {
    let nodes = a.grid().node_count();
    let mut worst = (f64::INFINITY, 0, 0);
    for (i, &x) in a.data().iter().enumerate() {
        let y = b.map_or(0.0, |b| b.data()[i]);
        let v = (x - y) / scale;
        if v < worst.0 {
            worst = (v, i % nodes, i / nodes);
        }
    }
    worst
}

fn nonnegative(ctx: &VerifyContext, corpus: &Corpus) -> Result<Vec<Field>> {
    let fs = corpus.realize_nonnegative(&ctx.grid)?;
    if fs.is_empty() {
        return Err(Error::Input("corpus has no nonnegative members".into()));
    }
    Ok(fs)
}

/// `(ε + H)^{-1} f ≥ −10·tol·‖f‖∞` for the nonnegative corpus members.
pub fn positivity_check(ctx: &VerifyContext, corpus: &Corpus, eps: f64) -> Result<CheckResult> {
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let fs = nonnegative(ctx, corpus)?;
    let per: Vec<_> = fs
        .par_iter()
        .map(|f| {
            let (u, _) = h.resolvent(eps, f, ctx.tol)?;
            Ok(min_diff(&u, None, f.max_abs()))
        })
        .collect::<Result<_>>()?;
    let (margin, witness) = reduce(per);
    Ok(CheckResult::from_margin(
        "positivity",
        margin,
        10.0 * ctx.tol,
        witness,
        json!({ "eps": eps, "members": fs.len(), "tol": ctx.tol }),
    ))
}

/// `H_{ε,M₁}^{-1} f ≤ H_{ε,M₂}^{-1} f` for `M₁ ≤ M₂`, nonnegative `f`.
pub fn m_monotonicity_check(
    ctx: &VerifyContext,
    corpus: &Corpus,
    eps: f64,
    m1: u32,
    m2: u32,
) -> Result<CheckResult> {
    if m1 > m2 {
        return Err(Error::Input(format!("need M1 <= M2, got {m1} > {m2}")));
    }
    let h1 = OperatorHandle::new(ctx.grid, &ctx.potential.truncate_eps_m(eps, m1)?, 0.0)?;
    let h2 = OperatorHandle::new(ctx.grid, &ctx.potential.truncate_eps_m(eps, m2)?, 0.0)?;
    let fs = nonnegative(ctx, corpus)?;
    let per: Vec<_> = fs
        .par_iter()
        .map(|f| {
            let (u1, _) = h1.resolvent(0.0, f, ctx.tol)?;
            let (u2, _) = h2.resolvent(0.0, f, ctx.tol)?;
            Ok(min_diff(&u2, Some(&u1), f.max_abs()))
        })
        .collect::<Result<_>>()?;
    let (margin, witness) = reduce(per);
    Ok(CheckResult::from_margin(
        "m-monotonicity",
        margin,
        10.0 * ctx.tol,
        witness,
        json!({ "eps": eps, "M1": m1, "M2": m2, "members": fs.len(), "tol": ctx.tol }),
    ))
}

/// `(ε₂ + H)^{-1} f ≥ (ε₁ + H)^{-1} f` for `ε₂ < ε₁`, nonnegative `f`: the
/// family increases as `ε` decreases. The margin of the opposite ordering is
/// reported as a diagnostic.
pub fn eps_monotonicity_check(
    ctx: &VerifyContext,
    corpus: &Corpus,
    eps_large: f64,
    eps_small: f64,
) -> Result<CheckResult> {
    if !(eps_small > 0.0 && eps_small < eps_large) {
        return Err(Error::Input("need 0 < eps_small < eps_large".into()));
    }
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let fs = nonnegative(ctx, corpus)?;
    let per: Vec<_> = fs
        .par_iter()
        .map(|f| {
            let (big, _) = h.resolvent(eps_large, f, ctx.tol)?;
            let (small, _) = h.resolvent(eps_small, f, ctx.tol)?;
            let s = f.max_abs();
            Ok((
                min_diff(&small, Some(&big), s),
                min_diff(&big, Some(&small), s).0,
            ))
        })
        .collect::<Result<_>>()?;
    let reverse = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let (margin, witness) = reduce(per.into_iter().map(|p| p.0).collect());
    Ok(CheckResult::from_margin(
        "eps-monotonicity",
        margin,
        10.0 * ctx.tol,
        witness,
        json!({
            "eps_large": eps_large,
            "eps_small": eps_small,
            "members": fs.len(),
            "tol": ctx.tol,
            "reverse_order_margin": reverse,
        }),
    ))
}

/// `‖ε(ε + H)^{-1} f‖₁ ≤ ‖f‖₁` on the corpus and 20 random fields; margin
/// `1 − ratio`.
pub fn l1_contraction_check(
    ctx: &VerifyContext,
    corpus: &Corpus,
    eps_values: &[f64],
) -> Result<CheckResult> {
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let mut fs = corpus.realize_all(&ctx.grid)?;
    fs.extend(random_field_set(
        &ctx.grid,
        h.components(),
        20,
        ctx.seed ^ 0x11,
    ));
    let one = Exponent::Finite(1.0);
    let jobs: Vec<(usize, f64)> = (0..fs.len())
        .flat_map(|i| eps_values.iter().map(move |&e| (i, e)))
        .collect();
    let per: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(i, eps)| {
            let f = &fs[i];
            let (u, _) = h.resolvent(eps, f, ctx.tol)?;
            let ratio = eps * lp_norm(&ctx.grid, &u, one)? / lp_norm(&ctx.grid, f, one)?;
            Ok((1.0 - ratio, eps))
        })
        .collect::<Result<_>>()?;
    let mut worst = (f64::INFINITY, 0);
    for (j, (m, _)) in per.iter().enumerate() {
        if *m < worst.0 {
            worst = (*m, j);
        }
    }
    let (i, eps) = jobs[worst.1];
    Ok(CheckResult::from_margin(
        "l1-contraction",
        worst.0,
        10.0 * ctx.tol,
        json!({ "member": i, "eps": eps }),
        json!({ "eps": eps_values, "fields": fs.len(), "tol": ctx.tol }),
    ))
}

pub const LP_EXPONENTS: [Exponent; 4] = [
    Exponent::Finite(1.0),
    Exponent::Finite(2.0),
    Exponent::Finite(4.0),
    Exponent::Infinity,
];

/// `μ‖u‖_p ≤ ‖(μ + H)u‖_p` for `p ∈ {1, 2, 4, ∞}` on `count` random fields
/// (no solve involved); margin `1 − ratio`.
pub fn lp_resolvent_check(ctx: &VerifyContext, count: usize, mus: &[f64]) -> Result<CheckResult> {
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let fs = random_field_set(&ctx.grid, h.components(), count, ctx.seed ^ 0x22);
    let per: Vec<Vec<(f64, f64, String)>> = fs
        .par_iter()
        .map(|u| {
            let hu = h.apply(u)?;
            let mut out = Vec::new();
            for &mu in mus {
                let mut shifted = hu.clone();
                shifted.axpy(mu, u);
                for p in LP_EXPONENTS {
                    let ratio = mu * lp_norm(&ctx.grid, u, p)? / lp_norm(&ctx.grid, &shifted, p)?;
                    out.push((1.0 - ratio, mu, p.to_string()));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut worst = (f64::INFINITY, json!(null));
    for (i, rows) in per.into_iter().enumerate() {
        for (m, mu, p) in rows {
            if m < worst.0 {
                worst = (m, json!({ "field": i, "mu": mu, "p": p }));
            }
        }
    }
    Ok(CheckResult::from_margin(
        "lp-resolvent",
        worst.0,
        10.0 * ctx.tol,
        worst.1,
        json!({ "mu": mus, "p": ["1", "2", "4", "inf"], "fields": count }),
    ))
}

/// `‖e^{−tH}u0‖ ≤ e^{tΔ}‖u0‖` nodewise with matched implicit-Euler steps on
/// the first ten mixed-sign corpus members; relative to `‖u0‖∞`.
pub fn domination_check(
    ctx: &VerifyContext,
    corpus: &Corpus,
    t: f64,
    steps: usize,
) -> Result<CheckResult> {
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let mut fs = corpus.realize_mixed(&ctx.grid)?;
    fs.truncate(10);
    if fs.is_empty() {
        return Err(Error::Input("corpus has no mixed-sign members".into()));
    }
    let per: Vec<_> = fs
        .par_iter()
        .map(|u0| {
            let v = evolve(&h, u0, t, steps, Scheme::ImplicitEuler, ctx.tol)?;
            let w = heat_scalar(&ctx.grid, &u0.pointwise_norm(), t, steps, ctx.tol)?;
            let (m, node, _) =
                min_diff(&w, Some(&v.pointwise_norm()), u0.pointwise_norm().max_abs());
            Ok((m, node, 0))
        })
        .collect::<Result<_>>()?;
    let (margin, witness) = reduce(per);
    Ok(CheckResult::from_margin(
        "domination",
        margin,
        10.0 * ctx.tol,
        witness,
        json!({ "t": t, "steps": steps, "members": fs.len(), "tol": ctx.tol }),
    ))
}
