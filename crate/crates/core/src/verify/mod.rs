//! Numerical checks of the structural inequalities satisfied by `−Δ_h + V`,
//! each returning a [`CheckResult`], and the suites that group them.
//!
//! Margins are normalized so that `0` is the boundary of the inequality and
//! a check passes iff `margin ≥ −slack`; the slack actually used is recorded
//! in `params.slack`.

mod corpus;
mod estimates;
mod exact;
mod positivity;

pub use corpus::{BumpSpec, Corpus};
pub use estimates::{
    fefferman_phong_check, fefferman_phong_constant, fp_cubes, hypotheses_check,
    l1_estimates_check, maximal_ratio, maximal_ratio_check, mean_rh_solution_check,
    subharmonic_solution_check, trotter_check, truncation_threshold_check, FpOptions, MaximalRatio,
};
pub use exact::{
    gradient_norm_check, kato_check, random_field_set, random_fields, subharmonic_check,
    EXACT_SLACK,
};
pub use positivity::{
    domination_check, eps_monotonicity_check, l1_contraction_check, lp_resolvent_check,
    m_monotonicity_check, positivity_check,
};

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::MatrixPotential;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    /// Smallest normalized slack observed; negative means violated.
    #[serde(with = "crate::serde_ext::nan_or_null")]
    pub margin: f64,
    pub witness: Value,
    pub params: Value,
    pub runtime_ms: Option<f64>,
}

impl CheckResult {
    /// Builds a result with `pass ⇔ margin ≥ −slack`.
    pub fn from_margin(
        check: &str,
        margin: f64,
        slack: f64,
        witness: Value,
        params: Value,
    ) -> Self {
        let mut params = params;
        if let Value::Object(map) = &mut params {
            map.insert("slack".into(), json!(slack));
        }
        Self {
            check: check.to_string(),
            pass: margin >= -slack,
            margin,
            witness,
            params,
            runtime_ms: None,
        }
    }

    fn failed(check: &str, err: &Error) -> Self {
        Self {
            check: check.to_string(),
            pass: false,
            margin: f64::NAN,
            witness: json!({ "error": err.to_string(), "kind": err.kind() }),
            params: json!({}),
            runtime_ms: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metadata {
    pub version: String,
    pub unix_time: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub metadata: Option<Metadata>,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(mut checks: Vec<CheckResult>) -> Self {
        checks.sort_by(|a, b| a.check.cmp(&b.check));
        let pass = checks.iter().all(|c| c.pass);
        Self {
            metadata: None,
            pass,
            checks,
        }
    }

    /// Drops runtimes and metadata so identical runs serialize identically.
    pub fn stabilize(&mut self) {
        self.metadata = None;
        for c in &mut self.checks {
            c.runtime_ms = None;
        }
    }

    pub fn stamp(&mut self) {
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        self.metadata = Some(Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            unix_time,
            threads: rayon::current_num_threads(),
        });
    }

    /// Concatenates reports and re-sorts the checks.
    pub fn merge(reports: impl IntoIterator<Item = Report>) -> Self {
        Self::new(reports.into_iter().flat_map(|r| r.checks).collect())
    }
}

/// Everything a suite needs besides the check names.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub potential: MatrixPotential,
    /// Declared reverse-Hölder exponent of `λ_V`.
    pub declared_q: Option<f64>,
    pub grid: Grid,
    pub tol: f64,
    pub seed: u64,
    pub corpus_size: usize,
    pub nonnegative_size: usize,
    pub random_fields: usize,
}

impl VerifyContext {
    pub fn new(
        potential: MatrixPotential,
        declared_q: Option<f64>,
        grid: Grid,
        tol: f64,
        seed: u64,
    ) -> Self {
        Self {
            potential,
            declared_q,
            grid,
            tol,
            seed,
            corpus_size: Corpus::DEFAULT_SIZE,
            nonnegative_size: Corpus::DEFAULT_NONNEGATIVE,
            random_fields: 100,
        }
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::generate(
            self.grid.dim(),
            self.grid.half_width(),
            self.potential.components(),
            self.corpus_size,
            self.nonnegative_size,
            self.seed,
        )
    }

    /// The grid with `3n/2` nodes per axis.
    pub fn refined_grid(&self) -> Result<Grid> {
        self.grid.with_nodes(3 * self.grid.n() / 2)
    }

    /// Upper exponent for the `L^p` checks.
    pub fn p_max(&self) -> f64 {
        self.declared_q.unwrap_or(2.0)
    }
}

pub const SUITES: [(&str, &[&str]); 6] = [
    ("exact", &["gradient-norm", "kato", "subharmonic"]),
    (
        "positivity",
        &[
            "domination",
            "eps-monotonicity",
            "l1-contraction",
            "lp-resolvent",
            "m-monotonicity",
            "positivity",
        ],
    ),
    ("potential", &["hypotheses", "truncation-threshold"]),
    (
        "paper-l1",
        &["fefferman-phong-p1", "l1-estimates", "maximal-ratio-p1"],
    ),
    (
        "paper-lp",
        &[
            "fefferman-phong-p2",
            "maximal-ratio-p2",
            "mean-rh-solution",
            "subharmonic-solution",
        ],
    ),
    ("semigroup", &["trotter"]),
];

/// Every registered check name.
pub fn check_names() -> Vec<&'static str> {
    let set: BTreeSet<&str> = SUITES.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    set.into_iter().collect()
}

/// Expands suite names (and bare check names) into a sorted set of checks.
pub fn resolve_names(names: &[String]) -> Result<Vec<&'static str>> {
    let all = check_names();
    let mut out = BTreeSet::new();
    for name in names {
        if name == "all" {
            out.extend(all.iter().copied());
        } else if let Some((_, checks)) = SUITES.iter().find(|(s, _)| s == name) {
            out.extend(checks.iter().copied());
        } else if let Some(c) = all.iter().find(|c| *c == name) {
            out.insert(*c);
        } else {
            return Err(Error::Input(format!("unknown suite or check {name:?}")));
        }
    }
    Ok(out.into_iter().collect())
}

fn run_one(name: &str, ctx: &VerifyContext) -> Result<CheckResult> {
    let corpus = || ctx.corpus();
    match name {
        "kato" => Ok(kato_check(&random_fields(ctx)?)),
        "subharmonic" => Ok(subharmonic_check(&random_fields(ctx)?)),
        "gradient-norm" => Ok(gradient_norm_check(&random_fields(ctx)?)),
        "positivity" => positivity_check(ctx, &corpus()?, 0.1),
        "m-monotonicity" => m_monotonicity_check(ctx, &corpus()?, 0.1, 2, 8),
        "eps-monotonicity" => eps_monotonicity_check(ctx, &corpus()?, 0.1, 0.01),
        "l1-contraction" => l1_contraction_check(ctx, &corpus()?, &[0.1, 1.0, 10.0]),
        "lp-resolvent" => lp_resolvent_check(ctx, 20, &[0.1, 1.0, 10.0]),
        "domination" => domination_check(ctx, &corpus()?, 0.1, 20),
        "hypotheses" => hypotheses_check(ctx, 10_000),
        "truncation-threshold" => {
            truncation_threshold_check(&ctx.potential, ctx.grid.half_width(), ctx.seed)
        }
        "l1-estimates" => l1_estimates_check(ctx, &corpus()?),
        "maximal-ratio-p1" => maximal_ratio_check(ctx, &corpus()?, 1.0),
        "maximal-ratio-p2" => maximal_ratio_check(ctx, &corpus()?, 2.0),
        "fefferman-phong-p1" => fefferman_phong_check(ctx, &corpus()?, 1.0),
        "fefferman-phong-p2" => fefferman_phong_check(ctx, &corpus()?, 2.0),
        "mean-rh-solution" => mean_rh_solution_check(ctx),
        "subharmonic-solution" => subharmonic_solution_check(ctx),
        "trotter" => trotter_check(ctx, 0.1, 1, 0.05),
        other => Err(Error::Input(format!("unknown check {other:?}"))),
    }
}

/// Runs the named suites/checks concurrently and collects a sorted report.
/// A check that errors is reported as failed with the error as witness.
pub fn run_suite(names: &[String], ctx: &VerifyContext) -> Result<Report> {
    let checks = resolve_names(names)?;
    let results: Vec<CheckResult> = checks
        .par_iter()
        .map(|name| {
            let start = Instant::now();
            let mut r = run_one(name, ctx).unwrap_or_else(|e| CheckResult::failed(name, &e));
            r.check = name.to_string();
            r.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            r
        })
        .collect();
    Ok(Report::new(results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_resolve() {
        assert!(resolve_names(&[]).unwrap().is_empty());
        let exact = resolve_names(&["exact".into()]).unwrap();
        assert_eq!(exact, vec!["gradient-norm", "kato", "subharmonic"]);
        let all = resolve_names(&["all".into()]).unwrap();
        assert_eq!(all.len(), check_names().len());
        assert!(
            resolve_names(&["kato".into(), "exact".into()])
                .unwrap()
                .len()
                == 3
        );
        assert!(matches!(
            resolve_names(&["nonsense".into()]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn empty_names_give_empty_report() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let ctx = VerifyContext::new(MatrixPotential::zero(1, 1), None, g, 1e-8, 1);
        let r = run_suite(&[], &ctx).unwrap();
        assert!(r.checks.is_empty());
        assert!(r.pass);
    }

    #[test]
    fn report_sorting_and_merge() {
        let mk = |n: &str, pass| CheckResult {
            check: n.into(),
            pass,
            margin: if pass { 0.0 } else { -1.0 },
            witness: Value::Null,
            params: json!({}),
            runtime_ms: Some(1.0),
        };
        let a = Report::new(vec![mk("zeta", true), mk("alpha", true)]);
        assert_eq!(a.checks[0].check, "alpha");
        assert!(a.pass);
        let b = Report::new(vec![mk("beta", false)]);
        let mut m = Report::merge([a, b]);
        assert_eq!(
            m.checks
                .iter()
                .map(|c| c.check.as_str())
                .collect::<Vec<_>>(),
            ["alpha", "beta", "zeta"]
        );
        assert!(!m.pass);
        m.stabilize();
        assert!(m.checks.iter().all(|c| c.runtime_ms.is_none()));
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Report>(&text).unwrap(), m);
    }

    #[test]
    fn margin_and_slack_decide_pass() {
        let r = CheckResult::from_margin("x", -1e-9, 1e-8, Value::Null, json!({}));
        assert!(r.pass);
        assert_eq!(r.params["slack"], json!(1e-8));
        assert!(!CheckResult::from_margin("x", -1e-7, 1e-8, Value::Null, json!({})).pass);
        assert!(!CheckResult::from_margin("x", f64::NAN, 1.0, Value::Null, json!({})).pass);
    }
}
