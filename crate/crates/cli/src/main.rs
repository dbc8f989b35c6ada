use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use schrovec_core::grid::Exponent;
use schrovec_core::potential::PointSampler;
use schrovec_core::rh::{self, CubeFamily, Quadrature};
use schrovec_core::solver::{evolve, Scheme};
use schrovec_core::svf;
use schrovec_core::verify::{run_suite, Report, VerifyContext};
use schrovec_core::{Error, Field, OperatorHandle, RunConfig};

#[derive(Parser)]
#[command(
    name = "schrovec",
    version,
    about = "Vector Schrödinger operators with matrix potentials"
)]
struct Cli {
    /// Worker threads (falls back to SCHROVEC_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the structural hypotheses of a potential.
    CheckPotential {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reverse-Hölder estimate for the smallest eigenvalue of the potential.
    Rh(RhArgs),
    /// Solve (μ + H)u = f.
    Solve {
        #[command(flatten)]
        io: FieldIo,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
    },
    /// Approximate e^{−tH}u0 by repeated resolvent steps.
    Evolve {
        #[command(flatten)]
        io: FieldIo,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value = "implicit-euler")]
        scheme: Scheme,
    },
    /// Run verification suites and write a JSON report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Suite or check names; repeat or separate with commas.
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
        /// Nodes per axis (overrides the config).
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Omit timings and metadata so reruns are byte-identical.
        #[arg(long)]
        stable_output: bool,
    },
    /// Combine reports.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        merge: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stable_output: bool,
    },
    /// Write a bump field on the config grid as SVF1.
    MakeBump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Vec<f64>,
        #[arg(long)]
        radius: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        amplitude: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RhArgs {
    #[arg(long)]
    config: PathBuf,
    /// Exponent (defaults to the declared q, else 2).
    #[arg(long)]
    q: Option<String>,
    /// Largest cube side (defaults to L).
    #[arg(long)]
    base_side: Option<f64>,
    #[arg(long, default_value_t = 6)]
    scales: usize,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// Also fit the membership trend.
    #[arg(long)]
    trend: bool,
}

#[derive(Args)]
struct FieldIo {
    #[arg(long)]
    config: PathBuf,
    /// Input field (SVF1).
    #[arg(long)]
    rhs: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also export a CSV slice of the result.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit wall-clock times from the printed stats.
    #[arg(long)]
    stable_output: bool,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            let (kind, code) = classify(&e);
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={kind} message={message}");
            ExitCode::from(code)
        }
    }
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    match e.downcast_ref::<Error>() {
        Some(err) => match err.kind() {
            "numeric" => ("numeric", 3),
            kind => (kind, 2),
        },
        None => ("config", 2),
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<Outcome> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::CheckPotential {
            config,
            samples,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let pot = cfg.potential()?;
            let sampler = PointSampler::new(cfg.grid.half_width, samples, seed.unwrap_or(cfg.seed));
            let report = pot.check_hypotheses(&sampler)?;
            print_json(&report)?;
            Ok(if report.all_ok() {
                Outcome::Ok
            } else {
                Outcome::ChecksFailed
            })
        }
        Command::Rh(args) => rh_command(args),
        Command::Solve { io, mu } => {
            let (cfg, h, f) = load_field_problem(&io)?;
            let tol = io.tol.unwrap_or(cfg.solver.tol);
            let (u, stats) = h.resolvent_with(mu, &f, tol, None, cfg.solver.max_iter)?;
            write_outputs(&io, &u)?;
            let mut out = json!({ "mu": mu, "tol": tol, "stats": stats });
            if io.stable_output {
                out["stats"]["wall_time_ms"] = serde_json::Value::Null;
            }
            print_json(&out)?;
            Ok(Outcome::Ok)
        }
        Command::Evolve {
            io,
            t,
            steps,
            scheme,
        } => {
            let (cfg, h, u0) = load_field_problem(&io)?;
            let tol = io.tol.unwrap_or(cfg.solver.tol);
            let start = std::time::Instant::now();
            let u = evolve(&h, &u0, t, steps, scheme, tol)?;
            write_outputs(&io, &u)?;
            let mut out = json!({
                "t": t,
                "steps": steps,
                "scheme": scheme,
                "tol": tol,
                "l2_initial": u0.inner(&u0).sqrt(),
                "l2_final": u.inner(&u).sqrt(),
                "wall_time_ms": start.elapsed().as_secs_f64() * 1e3,
            });
            if io.stable_output {
                out["wall_time_ms"] = serde_json::Value::Null;
            }
            print_json(&out)?;
            Ok(Outcome::Ok)
        }
        Command::Verify {
            config,
            suite,
            grid,
            seed,
            tol,
            out,
            stable_output,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(n) = grid {
                cfg.grid.n = n;
            }
            if let Some(t) = tol {
                cfg.solver.tol = t;
            }
            cfg.validate()?;
            let names = if !suite.is_empty() {
                suite
            } else {
                vec![cfg.suite.clone().unwrap_or_else(|| "all".into())]
            };
            let ctx = VerifyContext::new(
                cfg.potential()?,
                cfg.potential.declared_q(),
                cfg.grid()?,
                cfg.solver.tol,
                seed.unwrap_or(cfg.seed),
            );
            let mut report = run_suite(&names, &ctx)?;
            finish_report(&mut report, stable_output);
            emit_report(&report, out.or(cfg.out).as_deref())?;
            Ok(if report.pass {
                Outcome::Ok
            } else {
                Outcome::ChecksFailed
            })
        }
        Command::Report {
            merge,
            out,
            stable_output,
        } => {
            let mut reports = Vec::new();
            for path in &merge {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let r: Report = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                reports.push(r);
            }
            let mut report = Report::merge(reports);
            finish_report(&mut report, stable_output);
            emit_report(&report, out.as_deref())?;
            Ok(if report.pass {
                Outcome::Ok
            } else {
                Outcome::ChecksFailed
            })
        }
        Command::MakeBump {
            config,
            center,
            radius,
            amplitude,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let f = schrovec_core::grid::bump(&cfg.grid()?, &center, radius, &amplitude)?;
            write_field(&out, &f)?;
            Ok(Outcome::Ok)
        }
    }
}

fn init_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SCHROVEC_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Error::Config(format!(
                    "SCHROVEC_THREADS must be a positive integer, got {v:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn rh_command(args: RhArgs) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load(&args.config)?;
    let pot = cfg.potential()?;
    let d = pot.dim();
    let q = match &args.q {
        Some(s) => Exponent::parse(s)?,
        None => Exponent::Finite(cfg.potential.declared_q().unwrap_or(2.0)),
    };
    let l = cfg.grid.half_width;
    let base = args.base_side.unwrap_or(l);
    let family = CubeFamily::dyadic(d, base, args.scales, 9, l)?;
    let mut quad = Quadrature::default_for(d);
    if let Some(n) = args.nodes {
        quad.nodes_per_axis = n;
    }
    if let Some(depth) = args.depth {
        quad.depth = depth;
    }
    let weight = |x: &[f64]| pot.lambda_min(x).unwrap_or(f64::NAN);
    let estimate = rh::bq_constant(&weight, q, &family, &quad)?;
    let mut out = json!({ "weight": "lambda_min", "estimate": estimate });
    if args.trend {
        let scales = rh::default_trend_scales(base, 5);
        let trend = rh::bq_membership_trend(&weight, q, &scales, d, quad.nodes_per_axis)?;
        out["trend"] = serde_json::to_value(trend)?;
    }
    print_json(&out)?;
    Ok(Outcome::Ok)
}

fn load_field_problem(io: &FieldIo) -> anyhow::Result<(RunConfig, OperatorHandle, Field)> {
    let cfg = RunConfig::load(&io.config)?;
    let grid = cfg.grid()?;
    let h = OperatorHandle::new(grid, &cfg.potential()?, 0.0)?;
    let file = File::open(&io.rhs)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", io.rhs.display())))?;
    let f = svf::read_field(BufReader::new(file))?;
    if *f.grid() != grid || f.components() != h.components() {
        bail!(Error::Input(format!(
            "{} does not match the configured grid and component count",
            io.rhs.display()
        )));
    }
    Ok((cfg, h, f))
}

fn write_outputs(io: &FieldIo, u: &Field) -> anyhow::Result<()> {
    if let Some(path) = &io.out {
        write_field(path, u)?;
    }
    if let Some(path) = &io.csv {
        let file = create(path)?;
        svf::write_csv_slice(BufWriter::new(file), u)?;
    }
    Ok(())
}

fn write_field(path: &Path, u: &Field) -> anyhow::Result<()> {
    let file = create(path)?;
    svf::write_field(BufWriter::new(file), u)?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<File> {
    File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())).into())
}

fn finish_report(report: &mut Report, stable: bool) {
    if stable {
        report.stabilize();
    } else {
        report.stamp();
    }
}

fn emit_report(report: &Report, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(create(path)?);
            serde_json::to_writer_pretty(&mut w, report)?;
            writeln!(w)?;
            w.flush()?;
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.check.as_str())
                .collect();
            println!(
                "{}",
                json!({ "pass": report.pass, "checks": report.checks.len(), "failed": failed })
            );
            Ok(())
        }
        None => print_json(report),
    }
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
