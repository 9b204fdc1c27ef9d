use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hnse::config::{parse_override, resolve_config, RunConfig};
use hnse::formats::{self, Report};
use hnse::pipeline::{bound_warnings, run_pipeline, run_pipeline_in, PipelineOutcome};
use hnse::run_dir::create_run_dir;
use hnse_core::averaging::fit_averaging_trend;
use hnse_core::lattice::annulus_points;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "hnse",
    version,
    about = "Lattice, spectral and cone/averaging diagnostics for 2D hyperviscous Navier-Stokes"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override, global = true)]
    overrides: Vec<(String, String)>,
    /// Base output directory (the HNSE_OUTPUT_DIR variable takes precedence).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice-point tools.
    #[command(subcommand)]
    Lattice(LatticeCommand),
    /// Integrate the prepared equation from random low-mode data.
    Simulate,
    /// Evolve a trajectory pair across the cutoff of a sparse annulus and record the cone margin.
    ConeCheck {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Restricted-operator norms on sparse annuli and their trend across `mu`.
    AveragingCheck {
        /// Comma-separated list, e.g. `1e4,1e5,1e6`.
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run the configured stages and write the report bundle.
    Pipeline,
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Record gaps between sums of two squares.
    Gaps {
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Lattice points with `lambda - k <= |j|^2 <= lambda + k`.
    Annulus {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k: f64,
    },
    /// Search for a certified sparse annulus.
    Sparse {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Strip cardinality statistics.
    Strips {
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Run(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn push(over: &mut Vec<(String, String)>, key: &str, v: Option<impl ToString>) {
    if let Some(v) = v {
        over.push((key.into(), v.to_string()));
    }
}

fn resolve(common: &Common, extra: Vec<(String, String)>) -> Result<RunConfig, Failure> {
    let mut over = Vec::new();
    push(&mut over, "output_dir", common.output_dir.as_ref().map(|p| p.display()));
    push(&mut over, "seed", common.seed);
    over.extend(common.overrides.iter().cloned());
    over.extend(extra);
    resolve_config(common.config.as_deref(), &over).map_err(|e| Failure::Config(e.to_string()))
}

fn stages(names: &str) -> (String, String) {
    ("stages".into(), names.into())
}

fn report(out: &PipelineOutcome) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for s in &out.stages {
        println!("{:<10} {:<9} {}", s.stage.name(), format!("{:?}", s.status).to_lowercase(), s.summary);
    }
    println!("outputs in {}", out.dir.display());
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.common;
    match cli.command {
        Command::Lattice(LatticeCommand::Gaps { limit }) => {
            let mut extra = vec![stages("gaps")];
            push(&mut extra, "gaps_limit", limit);
            report(&run_pipeline(&resolve(c, extra)?)?);
        }
        Command::Lattice(LatticeCommand::Annulus { lambda, k }) => {
            let cfg = resolve(c, vec![stages("gaps")])?;
            let pts = annulus_points(lambda, k).map_err(|e| Failure::Config(e.to_string()))?;
            for w in bound_warnings(lambda, k) {
                eprintln!("warning: {w}");
            }
            let dir = create_run_dir(&cfg.output_dir)?;
            formats::write_file(&dir.join("annulus_points.csv"), |w| formats::write_points(w, &pts))?;
            println!("{} lattice points in [{}, {}]", pts.len(), lambda - k, lambda + k);
            println!("outputs in {}", dir.display());
        }
        Command::Lattice(LatticeCommand::Sparse { mu, s }) => {
            let mut extra = vec![stages("sparse")];
            push(&mut extra, "mu", mu);
            push(&mut extra, "s", s);
            report(&run_pipeline(&resolve(c, extra)?)?);
        }
        Command::Lattice(LatticeCommand::Strips { mu, s }) => {
            let mut extra = vec![stages("strips")];
            push(&mut extra, "mu", mu);
            push(&mut extra, "s", s);
            report(&run_pipeline(&resolve(c, extra)?)?);
        }
        Command::Simulate => report(&run_pipeline(&resolve(c, vec![stages("simulate")])?)?),
        Command::ConeCheck { mu, s, beta } => {
            let mut extra = vec![stages("cone")];
            push(&mut extra, "mu", mu);
            push(&mut extra, "beta", beta);
            push(&mut extra, "s", s);
            report(&run_pipeline(&resolve(c, extra)?)?);
        }
        Command::AveragingCheck { mu, s, beta, samples } => {
            let mut extra = vec![stages("averaging")];
            push(&mut extra, "beta", beta);
            push(&mut extra, "s", s);
            push(&mut extra, "samples", samples);
            averaging_check(c, extra, &mu)?;
        }
        Command::Pipeline => report(&run_pipeline(&resolve(c, Vec::new())?)?),
    }
    Ok(())
}

#[derive(Serialize)]
struct Trend {
    mus: Vec<f64>,
    lambda_n: Vec<f64>,
    max_norms: Vec<f64>,
    slope: Option<f64>,
    target_slope: f64,
    smallest_passing_lambda: Option<f64>,
}

/// One sub-run per `mu`, then the log-log trend of the largest norms.
fn averaging_check(c: &Common, extra: Vec<(String, String)>, mus: &[f64]) -> Result<(), Failure> {
    let base = resolve(c, extra.clone())?;
    let dir = create_run_dir(&base.output_dir)?;
    let mut reports = Vec::new();
    let mut used = Vec::new();
    for &mu in mus {
        let mut e = extra.clone();
        e.push(("mu".into(), format!("{mu:?}")));
        let cfg = resolve(c, e)?;
        let sub = dir.join(format!("mu-{mu:e}"));
        let out = run_pipeline_in(&cfg, &sub)?;
        report(&out);
        if let Some(r) = out.averaging {
            reports.push(r);
            used.push(mu);
        }
    }
    let trend = Trend {
        mus: used,
        lambda_n: reports.iter().map(|r| r.lambda_n).collect(),
        max_norms: reports.iter().map(|r| r.max_norm).collect(),
        slope: fit_averaging_trend(&reports),
        target_slope: -base.params.s / 2.0 + 0.1,
        smallest_passing_lambda: hnse_core::averaging::smallest_passing_lambda(&reports),
    };
    write_trend(&dir, &base, &trend)?;
    match trend.slope {
        Some(sl) => println!("trend slope {sl} (target <= {})", trend.target_slope),
        None => println!("trend slope unavailable (fewer than two annuli with nonzero norms)"),
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn write_trend(dir: &Path, cfg: &RunConfig, trend: &Trend) -> Result<(), Failure> {
    formats::write_json(&dir.join("averaging_trend.json"), &Report::new("averaging_trend", cfg, trend))?;
    Ok(())
}
