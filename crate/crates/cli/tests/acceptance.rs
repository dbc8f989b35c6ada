//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the lines always show up in `cargo test` output.

use std::process::{Command, ExitCode};
use std::time::Instant;

use schrovec_core::grid::{bump, Exponent};
use schrovec_core::potential::{n_threshold, Example1, PointSampler, PotentialConfig};
use schrovec_core::rh::{
    bq_constant, bq_membership_trend, default_trend_scales, power_weight, CubeFamily, Quadrature,
    Trend,
};
use schrovec_core::solver::{homogeneous_solve, trotter_study, DEFAULT_EPS_SCHEDULE};
use schrovec_core::verify::{
    domination_check, eps_monotonicity_check, gradient_norm_check, kato_check,
    l1_contraction_check, lp_resolvent_check, m_monotonicity_check, maximal_ratio_check,
    positivity_check, random_field_set, subharmonic_check, Corpus, VerifyContext,
};
use schrovec_core::{Grid, MatrixPotential, OperatorHandle};

const TOL: f64 = 1e-8;
const SEED: u64 = 24301;

const EX1: Example1 = Example1 {
    alpha: 0.5,
    beta: 1.0,
    c1: 2.0,
    k: 1.0,
    k1: 3.0,
};

fn example1(d: usize, g: &Grid) -> MatrixPotential {
    MatrixPotential::example1(d, EX1, g.spacing() / 4.0).unwrap()
}

fn preset(n: usize) -> VerifyContext {
    let g = Grid::new(2, 2.0, n).unwrap();
    VerifyContext::new(example1(2, &g), Some(2.0), g, TOL, SEED)
}

fn example2_3x3() -> MatrixPotential {
    let cfg: PotentialConfig = serde_json::from_str(
        r#"{"kind":"example2","d":2,"m":3,"eta":1.0,
            "eta_offdiag":[[0,0.5,0.25],[0.5,0,0.5],[0.25,0.5,0]],
            "c":[2,2,2],"C":[3,4,3],
            "C_offdiag":[[0,0.8,0.5],[0.8,0,0.8],[0.5,0.8,0]],
            "alpha":0.5,"q":2,"rho_min":1e-6}"#,
    )
    .unwrap();
    MatrixPotential::from_config(&cfg, None).unwrap()
}

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn exact_identities() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for d in 1..=3 {
        for m in 1..=3 {
            let g = Grid::new(d, 1.0, 32).map_err(|e| e.to_string())?;
            let fs = random_field_set(&g, m, 100, SEED + (10 * d + m) as u64);
            for r in [
                kato_check(&fs),
                subharmonic_check(&fs),
                gradient_norm_check(&fs),
            ] {
                ok &= r.margin >= -1e-12;
                worst = worst.min(r.margin);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        ok && secs < 30.0,
        format!("worst margin {worst:.3e}, {secs:.1} s"),
    ))
}

fn eigenvalues() -> Outcome {
    let start = Instant::now();
    let g = Grid::new(2, 2.0, 64).unwrap();
    let pot = example1(2, &g);
    let sampler = PointSampler::new(2.0, 10_000, SEED);
    let points = sampler
        .points(2, pot.rho_min())
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for x in &points {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (l1, l2) = EX1.eigenvalues_at(r);
        let (lo, hi) = pot.eigen_range(x).map_err(|e| e.to_string())?;
        worst = worst
            .max(((lo - l1) / l1).abs())
            .max(((hi - l2) / l2).abs());
    }
    let c = pot
        .check_hypotheses(&sampler)
        .map_err(|e| e.to_string())?
        .comparability;
    let bound = EX1.comparability_bound();
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-10 && c <= bound + 1e-9 && secs < 10.0,
        format!("max rel error {worst:.2e}, comparability {c:.4} <= {bound}, {secs:.1} s"),
    ))
}

fn truncation_threshold() -> Outcome {
    let g = Grid::new(2, 2.0, 64).unwrap();
    let pots = [(2, example1(2, &g)), (3, example2_3x3())];
    let sampler = PointSampler::new(2.0, 1000, SEED);
    let mut worst = f64::INFINITY;
    for (m, pot) in &pots {
        assert_eq!(pot.components(), *m);
        let points = sampler
            .points(2, pot.rho_min())
            .map_err(|e| e.to_string())?;
        for eps in [0.5, 1.0, 2.0] {
            for cap in [1, 2, 4] {
                let n = n_threshold(eps, cap, *m).map_err(|e| e.to_string())?;
                let t = pot
                    .truncate_eps_m_n(eps, cap, n)
                    .map_err(|e| e.to_string())?;
                for x in &points {
                    let lam = t.lambda_min(x).map_err(|e| e.to_string())?;
                    worst = worst.min(lam - eps / 2.0);
                }
            }
        }
    }
    let n112 = n_threshold(1.0, 1, 2).map_err(|e| e.to_string())?;
    Ok((
        worst >= -1e-10 && n112 == 12,
        format!("min(lambda_min - eps/2) {worst:.3e}, N(1,1,2) = {n112}"),
    ))
}

fn positivity_and_monotonicity() -> Outcome {
    let start = Instant::now();
    let ctx = preset(64);
    let corpus = ctx.corpus().map_err(|e| e.to_string())?;
    let pos = positivity_check(&ctx, &corpus, 0.1).map_err(|e| e.to_string())?;
    let mono = m_monotonicity_check(&ctx, &corpus, 0.1, 2, 8).map_err(|e| e.to_string())?;
    let eps = eps_monotonicity_check(&ctx, &corpus, 0.1, 0.01).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        pos.pass && mono.pass && eps.pass && secs < 120.0,
        format!(
            "positivity {:.2e}, M-monotone {:.2e}, u(0.01) >= u(0.1) {:.2e} \
             (opposite ordering margin {}), {secs:.1} s",
            pos.margin, mono.margin, eps.margin, eps.params["reverse_order_margin"]
        ),
    ))
}

fn contraction() -> Outcome {
    let ctx = preset(64);
    let corpus = ctx.corpus().map_err(|e| e.to_string())?;
    let mus = [0.1, 1.0, 10.0];
    let l1 = l1_contraction_check(&ctx, &corpus, &mus).map_err(|e| e.to_string())?;
    let lp = lp_resolvent_check(&ctx, 20, &mus).map_err(|e| e.to_string())?;
    Ok((
        l1.margin >= -1e-6 && lp.margin >= -1e-6,
        format!("l1 margin {:.3e}, lp margin {:.3e}", l1.margin, lp.margin),
    ))
}

fn domination() -> Outcome {
    let ctx = preset(64);
    let corpus = ctx.corpus().map_err(|e| e.to_string())?;
    let r = domination_check(&ctx, &corpus, 0.1, 20).map_err(|e| e.to_string())?;
    Ok((r.pass, format!("margin {:.3e}", r.margin)))
}

fn trotter() -> Outcome {
    let g = Grid::new(1, 2.0, 128).unwrap();
    let pot = example1(1, &g);
    let f = bump(&g, &[0.2], 1.0, &[1.0, -0.5]).map_err(|e| e.to_string())?;
    let study = trotter_study(&g, &pot, 0.1, 1, &f, 0.05, &[4, 8, 16, 32], 1e-10)
        .map_err(|e| e.to_string())?;
    let errs: Vec<f64> = study.entries.iter().map(|e| e.total_error).collect();
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let ratio = errs[errs.len() - 1] / errs[0];
    Ok((
        monotone && ratio <= 1.0 / 3.0,
        format!("errors {errs:.4?}, last/first {ratio:.3}"),
    ))
}

fn reverse_holder() -> Outcome {
    let q = 2.0;
    let family = CubeFamily::dyadic(2, 1.0, 4, 9, 2.0).map_err(|e| e.to_string())?;
    let one = bq_constant(
        &|_: &[f64]| 1.0,
        Exponent::Finite(q),
        &family,
        &Quadrature::default_for(2),
    )
    .map_err(|e| e.to_string())?
    .constant;
    let mut ok = one == 1.0;
    let mut cases = Vec::new();
    for d in [1usize, 2] {
        for factor in [0.25, 0.9, 1.2] {
            let gamma = factor * d as f64 / q;
            let w = power_weight(gamma);
            let report =
                bq_membership_trend(&w, Exponent::Finite(q), &default_trend_scales(1.0, 5), d, 8)
                    .map_err(|e| e.to_string())?;
            let expected = if gamma < d as f64 / q {
                Trend::Bounded
            } else {
                Trend::Diverging
            };
            ok &= report.trend == expected;
            cases.push(format!(
                "d={d} g={gamma:.3}:{:?}/{:.3}",
                report.trend, report.slope
            ));
        }
    }
    Ok((ok, format!("C(w=1) = {one}, {}", cases.join(" "))))
}

fn maximal_ratio() -> Outcome {
    let start = Instant::now();
    let ctx = preset(64);
    let corpus = ctx.corpus().map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0] {
        let r = maximal_ratio_check(&ctx, &corpus, p).map_err(|e| e.to_string())?;
        ok &= r.pass;
        parts.push(format!(
            "p={p}: {} -> {} ({:.1}%)",
            r.params["constant"],
            r.params["constant_refined"],
            100.0 * r.params["relative_change"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        ok && secs < 300.0,
        format!("{}, {secs:.1} s", parts.join("; ")),
    ))
}

fn homogeneous() -> Outcome {
    let g = Grid::new(2, 2.0, 64).unwrap();
    let h = OperatorHandle::new(g, &example1(2, &g), 0.0).map_err(|e| e.to_string())?;
    let corpus = Corpus::generate(2, 2.0, 2, 10, 0, SEED).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for u in corpus.realize_all(&g).map_err(|e| e.to_string())? {
        let f = h.apply(&u).map_err(|e| e.to_string())?;
        let sol =
            homogeneous_solve(&h, &f, &DEFAULT_EPS_SCHEDULE, TOL).map_err(|e| e.to_string())?;
        worst = worst.max(sol.u.sub(&u).l2_vec() / u.l2_vec());
    }
    Ok((
        worst <= 0.02,
        format!("max relative l2 error {:.3}%", 100.0 * worst),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("example1.json");
    std::fs::write(
        &config,
        r#"{"kind":"example1","d":2,"alpha":0.5,"beta":1,"c1":2,"k":1,"k1":3,"q":2}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("report{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_schrovec"))
            .args([
                "verify",
                "--suite",
                "all",
                "--seed",
                "24301",
                "--stable-output",
            ])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if status.status.code().is_none_or(|c| c > 1) {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        reports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    Ok((
        reports[0] == reports[1],
        format!("{} bytes per report", reports[0].len()),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("exact identities", exact_identities),
        ("example1 eigenvalues", eigenvalues),
        ("truncation threshold", truncation_threshold),
        (
            "resolvent positivity and monotonicity",
            positivity_and_monotonicity,
        ),
        ("l1 contraction and lp resolvent bound", contraction),
        ("domination", domination),
        ("trotter convergence", trotter),
        ("reverse-Hölder estimator", reverse_holder),
        ("maximal-ratio stability", maximal_ratio),
        ("homogeneous-solve consistency", homogeneous),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {:>2} {}: {name}: {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
