//! Checks whose constants are existential: they are fitted on the corpus and
//! accepted when stable under one grid refinement (`n → 3n/2`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CheckResult, Corpus, VerifyContext};
use crate::error::{Error, Result};
use crate::grid::{gradient_forward, laplacian_apply, lp_norm, Cube, Exponent, Field, Grid};
use crate::potential::{n_threshold, MatrixPotential, PointSampler};
use crate::solver::{homogeneous_solve, trotter_study, OperatorHandle, DEFAULT_EPS_SCHEDULE};

fn rel_change(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        0.0
    } else {
        (fine - coarse).abs() / coarse.abs()
    }
}

/// Sampled hypothesis check; margin `(C_bound − Ĉ)/C_bound` when the
/// potential has a closed-form comparability constant, `0` otherwise, and
/// `−1` on a structural violation.
pub fn hypotheses_check(ctx: &VerifyContext, samples: usize) -> Result<CheckResult> {
    let sampler = PointSampler::new(ctx.grid.half_width(), samples, ctx.seed);
    let rep = ctx.potential.check_hypotheses(&sampler)?;
    let structural = rep.symmetric_ok && rep.offdiag_nonpositive_ok && rep.psd_ok;
    let margin = if !structural || !rep.comparability.is_finite() {
        -1.0
    } else {
        rep.comparability_bound
            .map_or(0.0, |b| (b - rep.comparability) / b)
    };
    Ok(CheckResult::from_margin(
        "hypotheses",
        margin,
        1e-9,
        json!({ "worst_point": rep.worst_point, "violation": rep.witness }),
        serde_json::to_value(&rep)?,
    ))
}

/// `λ_min(V_{ε,M,N}) ≥ ε/2` at `N = n_threshold(ε, M, m)` over sampled
/// points, for `ε ∈ {0.5, 1, 2}` and `M ∈ {1, 2, 4}`; margin
/// `min(λ_min − ε/2)`.
pub fn truncation_threshold_check(
    pot: &MatrixPotential,
    half_width: f64,
    seed: u64,
) -> Result<CheckResult> {
    let m = pot.components();
    let points = PointSampler::new(half_width, PointSampler::MIN_COUNT, seed)
        .points(pot.dim(), pot.rho_min())?;
    let mut worst = (f64::INFINITY, json!(null));
    let mut thresholds = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        for big_m in [1u32, 2, 4] {
            let n = n_threshold(eps, big_m, m)?;
            thresholds.push(json!({ "eps": eps, "M": big_m, "N": n }));
            let t = pot.truncate_eps_m_n(eps, big_m, n)?;
            for x in &points {
                let margin = t.lambda_min(x)? - eps / 2.0;
                if margin < worst.0 {
                    worst = (
                        margin,
                        json!({ "eps": eps, "M": big_m, "N": n, "point": x }),
                    );
                }
            }
        }
    }
    Ok(CheckResult::from_margin(
        "truncation-threshold",
        worst.0,
        1e-10,
        worst.1,
        json!({ "m": m, "points": points.len(), "thresholds": thresholds }),
    ))
}

/// Trotter errors at `n ∈ {4, 8, 16, 32}` must decrease and end at most a
/// third of the first. Margin: the smallest relative decrease, or the
/// distance below `e₄/3`, whichever is worse.
pub fn trotter_check(ctx: &VerifyContext, eps: f64, m_cap: u32, t: f64) -> Result<CheckResult> {
    let corpus = ctx.corpus()?;
    let f = corpus
        .specs()
        .next()
        .ok_or_else(|| Error::Input("empty corpus".into()))?
        .realize(&ctx.grid)?;
    let ns = [4, 8, 16, 32];
    let study = trotter_study(
        &ctx.grid,
        &ctx.potential,
        eps,
        m_cap,
        &f,
        t,
        &ns,
        ctx.tol * 1e-2,
    )?;
    let e: Vec<f64> = study.entries.iter().map(|x| x.total_error).collect();
    let first = e[0];
    let mut margin = (first / 3.0 - e[e.len() - 1]) / first;
    for w in e.windows(2) {
        margin = margin.min((w[0] - w[1]) / first);
    }
    Ok(CheckResult::from_margin(
        "trotter",
        margin,
        0.0,
        json!(null),
        json!({ "eps": eps, "M": m_cap, "t": t, "study": study }),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximalRatio {
    pub p: f64,
    /// `max_u R_p(u)`.
    pub constant: f64,
    pub worst_member: usize,
    pub ratios: Vec<f64>,
}

/// `R_p(u) = (‖Δ_h u‖_p + ‖Vu‖_p)/‖(−Δ_h + V)u‖_p` over `fields`.
pub fn maximal_ratio(h: &OperatorHandle, fields: &[Field], p: Exponent) -> Result<MaximalRatio> {
    if fields.is_empty() {
        return Err(Error::Input("empty corpus".into()));
    }
    if h.shift() != 0.0 {
        return Err(Error::Input(
            "maximal ratio needs an unshifted operator".into(),
        ));
    }
    let g = *h.grid();
    let ratios = fields
        .par_iter()
        .map(|u| {
            let lap = lp_norm(&g, &laplacian_apply(&g, u)?, p)?;
            let pot = lp_norm(&g, &h.potential_apply(u)?, p)?;
            let den = lp_norm(&g, &h.apply(u)?, p)?;
            let num = lap + pot;
            if !(den > 1e-14 * num) {
                return Err(Error::Degenerate(format!(
                    "denominator {den:e} below 1e-14 of numerator {num:e}"
                )));
            }
            Ok(num / den)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (worst_member, constant) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(MaximalRatio {
        p: p.as_f64(),
        constant,
        worst_member,
        ratios,
    })
}

/// Fitted `Ĉ_p` on the corpus, required finite and within 15% under
/// refinement; for `p = 1` also `Ĉ₁ ≤ 1 + 2Ĉ + 0.05` with `Ĉ` the sampled
/// comparability constant.
pub fn maximal_ratio_check(ctx: &VerifyContext, corpus: &Corpus, p: f64) -> Result<CheckResult> {
    if !(p >= 1.0 && p <= ctx.p_max()) {
        return Err(Error::Input(format!(
            "p = {p} outside the admissible range [1, {}]",
            ctx.p_max()
        )));
    }
    let name = if p == 1.0 {
        "maximal-ratio-p1".to_string()
    } else {
        format!("maximal-ratio-p{p}")
    };
    let exp = Exponent::Finite(p);
    let fine_grid = ctx.refined_grid()?;
    let coarse = maximal_ratio(
        &OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?,
        &corpus.realize_all(&ctx.grid)?,
        exp,
    )?;
    let fine = maximal_ratio(
        &OperatorHandle::new(fine_grid, &ctx.potential, 0.0)?,
        &corpus.realize_all(&fine_grid)?,
        exp,
    )?;
    let change = rel_change(coarse.constant, fine.constant);
    let mut margin = 0.15 - change;
    let mut params = json!({
        "p": p,
        "n": ctx.grid.n(),
        "n_refined": fine_grid.n(),
        "constant": coarse.constant,
        "constant_refined": fine.constant,
        "relative_change": change,
    });
    if p == 1.0 {
        let sampler = PointSampler::new(ctx.grid.half_width(), 10_000, ctx.seed);
        let c = ctx.potential.check_hypotheses(&sampler)?.comparability;
        let bound = 1.0 + 2.0 * c + 0.05;
        margin = margin.min((bound - coarse.constant.max(fine.constant)) / bound);
        params["comparability"] = json!(c);
        params["bound"] = json!(bound);
    }
    if !coarse.constant.is_finite() || !fine.constant.is_finite() {
        margin = f64::NAN;
    }
    Ok(CheckResult::from_margin(
        &name,
        margin,
        0.0,
        json!({ "member": coarse.worst_member }),
        params,
    ))
}

/// Test cubes for the Fefferman–Phong check, all inside `[-L, L]^d`.
pub fn fp_cubes(d: usize, l: f64) -> Vec<Cube> {
    let at = |c: f64| vec![c; d];
    let mut skew = vec![l / 4.0; d];
    skew[0] = -l / 4.0;
    vec![
        Cube::new(at(0.0), l),
        Cube::new(at(0.0), l / 2.0),
        Cube::new(at(l / 4.0), l / 2.0),
        Cube::new(at(0.0), l / 4.0),
        Cube::new(skew, l / 4.0),
        Cube::new(at(0.0), l / 8.0),
        Cube::new(at(l / 8.0), l / 8.0),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct FpOptions {
    pub p: f64,
}

/// Largest `C` with
/// `∫_Q ‖∇_h u‖^p + ⟨Vu,u⟩‖u‖^{p−2} ≥ 2^{1−p} av_Q(min{C R^{−p}, λ_V}) ∫_Q ‖u‖^p`
/// for one field and cube (`R` the side). Gradients only use differences
/// between two nodes of `Q`. `+∞` when the inequality holds for every `C`.
pub fn fefferman_phong_constant(
    h: &OperatorHandle,
    lambda: &[f64],
    u: &Field,
    q: &Cube,
    opts: FpOptions,
) -> Result<f64> {
    let g = *h.grid();
    let p = opts.p;
    if !(p >= 1.0) {
        return Err(Error::Input(format!("p must be >= 1, got {p}")));
    }
    let nodes = q.nodes(&g);
    if nodes.is_empty() {
        return Err(Error::Input("cube contains no grid node".into()));
    }
    let mut inside = vec![false; g.node_count()];
    for &k in &nodes {
        inside[k] = true;
    }
    let m = u.components();
    let hd = g.cell_volume();
    let hs = g.spacing();
    let (mut energy, mut mass) = (0.0, 0.0);
    let mut vu = vec![0.0; m];
    let mut uk = vec![0.0; m];
    for &k in &nodes {
        let idx = g.unravel(k);
        let mut grad2 = 0.0;
        for axis in 0..g.dim() {
            let s = g.stride(axis);
            if idx[axis] + 1 < g.n() && inside[k + s] {
                grad2 += (0..m)
                    .map(|c| (u.at(k + s, c) - u.at(k, c)).powi(2))
                    .sum::<f64>()
                    / (hs * hs);
            }
        }
        energy += hd * grad2.powf(p / 2.0);
        u.vector_at(k, &mut uk);
        let norm = u.node_norm(k);
        if norm > 0.0 {
            h.node_matrix(k).mul_vec(&uk, &mut vu);
            let form: f64 = vu.iter().zip(&uk).map(|(a, b)| a * b).sum();
            energy += hd * form * norm.powf(p - 2.0);
            mass += hd * norm.powf(p);
        }
    }
    if mass == 0.0 {
        return Ok(f64::INFINITY);
    }
    let target = energy / (2f64.powf(1.0 - p) * mass);
    let mut lam: Vec<f64> = nodes.iter().map(|&k| lambda[k]).collect();
    lam.sort_by(|a, b| a.total_cmp(b));
    let count = lam.len() as f64;
    let mean = lam.iter().sum::<f64>() / count;
    if target >= mean {
        return Ok(f64::INFINITY);
    }
    // av(min{c, λ}) is piecewise linear and nondecreasing in c: walk the
    // sorted λ until the segment containing the target.
    let mut below = 0.0;
    let mut c = 0.0;
    for (i, &l) in lam.iter().enumerate() {
        let above = count - i as f64;
        let at_l = (below + l * above) / count;
        if at_l >= target {
            c = (target * count - below) / above;
            break;
        }
        below += l;
    }
    Ok(c.max(0.0) * q.side.powf(p))
}

fn fp_minimum(
    ctx: &VerifyContext,
    g: Grid,
    corpus: &Corpus,
    p: f64,
) -> Result<(f64, usize, usize)> {
    let h = OperatorHandle::new(g, &ctx.potential, 0.0)?;
    let lambda: Vec<f64> = h.eigen_ranges()?.into_iter().map(|r| r.0).collect();
    let cubes = fp_cubes(g.dim(), g.half_width());
    let fields = corpus.realize_all(&g)?;
    let per: Vec<(f64, usize)> = fields
        .par_iter()
        .map(|u| {
            let mut best = (f64::INFINITY, 0);
            for (j, q) in cubes.iter().enumerate() {
                let c = fefferman_phong_constant(&h, &lambda, u, q, FpOptions { p })?;
                if c < best.0 {
                    best = (c, j);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut out = (f64::INFINITY, 0, 0);
    for (i, (c, j)) in per.into_iter().enumerate() {
        if c < out.0 {
            out = (c, i, j);
        }
    }
    Ok(out)
}

/// Fitted `Ĉ_FP = min` over corpus × cubes; passes when positive and within
/// 20% under refinement (two infinite values count as stable).
pub fn fefferman_phong_check(ctx: &VerifyContext, corpus: &Corpus, p: f64) -> Result<CheckResult> {
    if p != 1.0 && p != 2.0 {
        return Err(Error::Input(format!("p must be 1 or 2, got {p}")));
    }
    if corpus.is_empty() {
        return Err(Error::Input("empty corpus".into()));
    }
    let fine_grid = ctx.refined_grid()?;
    let (coarse, member, cube) = fp_minimum(ctx, ctx.grid, corpus, p)?;
    let (fine, _, _) = fp_minimum(ctx, fine_grid, corpus, p)?;
    let change = if coarse.is_infinite() && fine.is_infinite() {
        0.0
    } else {
        rel_change(coarse, fine)
    };
    let mut margin = 0.2 - change;
    if !(coarse > 0.0 && fine > 0.0) {
        margin = -1.0;
    }
    let cubes = fp_cubes(ctx.grid.dim(), ctx.grid.half_width());
    let name = if p == 1.0 {
        "fefferman-phong-p1"
    } else {
        "fefferman-phong-p2"
    };
    Ok(CheckResult::from_margin(
        name,
        margin,
        0.0,
        json!({ "member": member, "cube": cubes[cube] }),
        json!({
            "p": p,
            "constant": if coarse.is_finite() { json!(coarse) } else { json!("inf") },
            "constant_refined": if fine.is_finite() { json!(fine) } else { json!("inf") },
            "relative_change": change,
            "cubes": cubes.len(),
            "members": corpus.len(),
        }),
    ))
}

/// `K = max_E ∫_E ‖∇_h u‖ / (|E|^{1/d} ‖f‖₁)` over dyadic cells `E` of
/// levels 1..=3.
fn gradient_constant(u: &Field, f_l1: f64) -> Result<f64> {
    let g = *u.grid();
    let d = g.dim();
    let l = g.half_width();
    let grad = gradient_forward(&g, u)?;
    let norms: Vec<f64> = (0..g.node_count())
        .map(|k| {
            grad.iter()
                .map(|f| f.node_norm(k).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut k_max = 0.0f64;
    for level in 1..=3u32 {
        let cells = 1usize << level;
        let side = 2.0 * l / cells as f64;
        let mut sums = vec![0.0; cells.pow(d as u32)];
        for (k, &v) in norms.iter().enumerate() {
            let p = g.point(k);
            let mut cell = 0;
            for a in 0..d {
                let i = (((p[a] + l) / side).floor() as usize).min(cells - 1);
                cell = cell * cells + i;
            }
            sums[cell] += g.cell_volume() * v;
        }
        let scale = side * f_l1;
        for s in sums {
            k_max = k_max.max(s / scale);
        }
    }
    Ok(k_max)
}

struct L1Parts {
    /// `max_ε ∫(λ_V + ε)‖u_ε‖ / ∫‖f‖`.
    lambda_ratio: f64,
    /// `‖(V + ε)u‖₁ / ‖f‖₁` at the smallest `ε`.
    potential_ratio: f64,
    laplacian_ratio: f64,
    gradient_constant: f64,
}

fn l1_parts(h: &OperatorHandle, lambda: &[f64], f: &Field, tol: f64) -> Result<L1Parts> {
    let g = *h.grid();
    let one = Exponent::Finite(1.0);
    let f_l1 = lp_norm(&g, f, one)?;
    if f_l1 == 0.0 {
        return Ok(L1Parts {
            lambda_ratio: 0.0,
            potential_ratio: 0.0,
            laplacian_ratio: 0.0,
            gradient_constant: 0.0,
        });
    }
    let sol = homogeneous_solve(h, f, &DEFAULT_EPS_SCHEDULE, tol)?;
    let mut lambda_ratio = 0.0f64;
    for (u, &eps) in sol.iterates.iter().zip(&sol.eps) {
        let s: f64 = (0..g.node_count())
            .map(|k| (lambda[k] + eps) * u.node_norm(k))
            .sum::<f64>()
            * g.cell_volume();
        lambda_ratio = lambda_ratio.max(s / f_l1);
    }
    let eps = *sol.eps.last().expect("nonempty schedule");
    let mut vu = h.potential_apply(&sol.u)?;
    vu.axpy(eps, &sol.u);
    let lap = laplacian_apply(&g, &sol.u)?;
    Ok(L1Parts {
        lambda_ratio,
        potential_ratio: lp_norm(&g, &vu, one)? / f_l1,
        laplacian_ratio: lp_norm(&g, &lap, one)? / f_l1,
        gradient_constant: gradient_constant(&sol.u, f_l1)?,
    })
}

/// The `L¹` estimates for `u = H^{-1} f` with nonnegative `f`:
/// (a) `∫λ_{V_ε}‖u_ε‖ ≤ ∫‖f‖`, (b) `‖V_ε u‖₁ ≤ Ĉ‖f‖₁` with `Ĉ` at most the
/// grid comparability constant, (c) `‖Δ_h u‖₁ ≤ (1 + Ĉ)‖f‖₁`, (d) a fitted
/// gradient constant `K` stable within 25% under refinement.
pub fn l1_estimates_check(ctx: &VerifyContext, corpus: &Corpus) -> Result<CheckResult> {
    let fs = corpus.realize_nonnegative(&ctx.grid)?;
    if fs.iter().any(|f| f.min_value() < 0.0) {
        return Err(Error::Input("l1 estimates need nonnegative data".into()));
    }
    let fine_grid = ctx.refined_grid()?;
    let fine_fs = corpus.realize_nonnegative(&fine_grid)?;
    let h = OperatorHandle::new(ctx.grid, &ctx.potential, 0.0)?;
    let hf = OperatorHandle::new(fine_grid, &ctx.potential, 0.0)?;
    let comparability = h.comparability()?;
    let lam = |h: &OperatorHandle| -> Result<Vec<f64>> {
        Ok(h.eigen_ranges()?.into_iter().map(|r| r.0).collect())
    };
    let (lc, lf) = (lam(&h)?, lam(&hf)?);
    let coarse: Vec<L1Parts> = fs
        .par_iter()
        .map(|f| l1_parts(&h, &lc, f, ctx.tol))
        .collect::<Result<_>>()?;
    let fine: Vec<L1Parts> = fine_fs
        .par_iter()
        .map(|f| l1_parts(&hf, &lf, f, ctx.tol))
        .collect::<Result<_>>()?;

    let max_of = |v: &[L1Parts], get: fn(&L1Parts) -> f64| v.iter().map(get).fold(0.0, f64::max);
    let a = max_of(&coarse, |x| x.lambda_ratio);
    let c_hat = max_of(&coarse, |x| x.potential_ratio);
    let mut c_margin = f64::INFINITY;
    for x in &coarse {
        c_margin = c_margin.min(1.0 - x.laplacian_ratio / (1.0 + x.potential_ratio));
    }
    let k = max_of(&coarse, |x| x.gradient_constant);
    let k_fine = max_of(&fine, |x| x.gradient_constant);
    let k_change = rel_change(k, k_fine);

    let parts = [
        ("a", 1.0 - a),
        ("b", (comparability - c_hat) / comparability),
        ("c", c_margin),
        ("d", 0.25 - k_change),
    ];
    let (which, margin) =
        parts.iter().copied().fold(
            ("", f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let margin = if fs.is_empty() { 0.0 } else { margin };
    Ok(CheckResult::from_margin(
        "l1-estimates",
        margin,
        10.0 * ctx.tol,
        json!({ "binding_part": which }),
        json!({
            "members": fs.len(),
            "lambda_ratio": a,
            "potential_constant": c_hat,
            "comparability": comparability,
            "laplacian_margin": c_margin,
            "gradient_constant": k,
            "gradient_constant_refined": k_fine,
            "gradient_relative_change": k_change,
            "eps_schedule": DEFAULT_EPS_SCHEDULE,
            "tol": ctx.tol,
        }),
    ))
}

const SOLUTION_SHIFT: f64 = 1e-6;

/// `Q` with side `L/8` centered at `(L/4, …, L/4)`.
fn solution_cube(g: &Grid) -> Cube {
    let l = g.half_width();
    Cube::new(vec![l / 4.0; g.dim()], l / 8.0)
}

/// Source bumps supported outside `4Q`, in order of preference.
fn outside_sources(g: &Grid, m: usize) -> Vec<super::BumpSpec> {
    let l = g.half_width();
    let d = g.dim();
    let r = l / 5.0;
    let mut second = vec![0.5 * l; d];
    second[0] = -0.5 * l;
    if d == 1 {
        second[0] = -0.6 * l;
    }
    let centers = [
        vec![-0.5 * l; d],
        second,
        vec![0.75 * l; d],
        vec![-0.7 * l; d],
    ];
    let amps = [1.0, 0.5, -0.8, 0.3];
    centers
        .into_iter()
        .enumerate()
        .map(|(i, center)| super::BumpSpec {
            center,
            radius: r,
            amplitude: (0..m)
                .map(|c| if c == 0 { 1.0 } else { amps[(i + c) % 4] })
                .collect(),
        })
        .collect()
}

/// Discrete solutions of `(μ + H)u = f` with `f` supported away from `4Q`.
fn discrete_solutions(
    ctx: &VerifyContext,
    g: Grid,
) -> Result<(OperatorHandle, Vec<(Field, Field)>)> {
    let h = OperatorHandle::new(g, &ctx.potential, 0.0)?;
    let quad = solution_cube(&g).dilate(4.0);
    let sols = outside_sources(&g, h.components())
        .par_iter()
        .map(|spec| {
            let f = spec.realize(&g)?;
            debug_assert!(quad.nodes(&g).iter().all(|&k| f.node_norm(k) == 0.0));
            let (u, _) = h.resolvent(SOLUTION_SHIFT, &f, ctx.tol)?;
            Ok((f, u))
        })
        .collect::<Result<_>>()?;
    Ok((h, sols))
}

fn mean_over(w: &[f64], nodes: &[usize], r: f64) -> f64 {
    let s: f64 = nodes.iter().map(|&k| w[k].powf(r)).sum();
    (s / nodes.len() as f64).powf(1.0 / r)
}

fn rh_ratios(ctx: &VerifyContext, g: Grid, r: f64) -> Result<Vec<f64>> {
    let (h, sols) = discrete_solutions(ctx, g)?;
    let q = solution_cube(&g);
    let (inner, outer) = (q.nodes(&g), q.dilate(2.0).nodes(&g));
    if inner.is_empty() {
        return Err(Error::Input("cube Q contains no grid node".into()));
    }
    let mut out = Vec::new();
    for (_, u) in sols {
        let w: Vec<f64> = {
            let vu = h.potential_apply(&u)?;
            (0..g.node_count()).map(|k| vu.node_norm(k)).collect()
        };
        let den = mean_over(&w, &outer, 1.0);
        if den == 0.0 {
            continue;
        }
        out.push(mean_over(&w, &inner, r) / den);
        if out.len() == 3 {
            break;
        }
    }
    if out.is_empty() {
        return Err(Error::Degenerate("every solution vanishes on 2Q".into()));
    }
    Ok(out)
}

/// `(av_Q ‖Vu‖^r)^{1/r} / av_{2Q} ‖Vu‖` for three discrete solutions of the
/// homogeneous equation on `4Q`; passes when the spread across solutions
/// and the change under refinement are both within 25%.
pub fn mean_rh_solution_check(ctx: &VerifyContext) -> Result<CheckResult> {
    let r = ctx.p_max();
    let coarse = rh_ratios(ctx, ctx.grid, r)?;
    let fine = rh_ratios(ctx, ctx.refined_grid()?, r)?;
    let lo = coarse.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = coarse.iter().copied().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    let change = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| rel_change(*a, *b))
        .fold(0.0, f64::max);
    let mut margin = (0.25 - spread).min(0.25 - change);
    if !hi.is_finite() {
        margin = f64::NAN;
    }
    let q = solution_cube(&ctx.grid);
    Ok(CheckResult::from_margin(
        "mean-rh-solution",
        margin,
        0.0,
        json!({ "cube": q }),
        json!({
            "r": r,
            "mu": SOLUTION_SHIFT,
            "ratios": coarse,
            "ratios_refined": fine,
            "spread": spread,
            "relative_change": change,
        }),
    ))
}

/// On interior nodes of `4Q`, where a discrete solution satisfies
/// `−Δ_h u + Vu = −μu + r` (`r` the CG residual):
/// `Δ_h‖u‖² ≥ 2⟨Vu, u⟩`, relative to `max ‖u‖²/h²`. The slack covers the
/// measured residual term `2‖u‖‖r‖` and `10·tol`.
pub fn subharmonic_solution_check(ctx: &VerifyContext) -> Result<CheckResult> {
    let g = ctx.grid;
    let (h, sols) = discrete_solutions(ctx, g)?;
    let omega = solution_cube(&g).dilate(4.0);
    let h2 = g.spacing() * g.spacing();
    let interior: Vec<usize> = omega
        .nodes(&g)
        .into_iter()
        .filter(|&k| {
            let idx = g.unravel(k);
            (0..g.dim()).all(|a| {
                let s = g.stride(a);
                idx[a] > 0
                    && idx[a] + 1 < g.n()
                    && omega.contains(&g.point(k - s)[..g.dim()])
                    && omega.contains(&g.point(k + s)[..g.dim()])
            })
        })
        .collect();
    let mut worst = (f64::INFINITY, 0usize, 0usize);
    let mut slack = 10.0 * ctx.tol;
    for (i, (f, u)) in sols.iter().enumerate() {
        let m = u.components();
        let sq = Field::from_vec(
            g,
            1,
            (0..g.node_count())
                .map(|k| u.node_norm(k).powi(2))
                .collect(),
        )?;
        let lap_sq = laplacian_apply(&g, &sq)?;
        let vu = h.potential_apply(u)?;
        let mut res = f.clone();
        res.axpy(-1.0, &h.with_shift(SOLUTION_SHIFT)?.apply(u)?);
        let scale = sq.max_abs() / h2;
        if scale == 0.0 {
            continue;
        }
        for &k in &interior {
            let form: f64 = (0..m).map(|c| vu.at(k, c) * u.at(k, c)).sum();
            let margin = (lap_sq.data()[k] - 2.0 * form) / scale;
            slack = slack.max(2.0 * u.node_norm(k) * res.node_norm(k) / scale);
            if margin < worst.0 {
                worst = (margin, i, k);
            }
        }
    }
    if interior.is_empty() {
        worst.0 = 0.0;
    }
    let p = g.point(worst.2);
    Ok(CheckResult::from_margin(
        "subharmonic-solution",
        worst.0,
        slack,
        json!({ "solution": worst.1, "node": worst.2, "point": &p[..g.dim()] }),
        json!({ "interior_nodes": interior.len(), "mu": SOLUTION_SHIFT, "tol": ctx.tol }),
    ))
}
