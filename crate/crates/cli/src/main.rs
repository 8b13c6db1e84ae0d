//! `reigate <kind> --spec <file> [--seed N] [--workers N] [--out DIR]`

mod artifact;
mod run;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use reigate::ion_model::DEFAULT_ION_CONFIG;
use reigate::{parse_ion_config, IntegratorSettings};

use crate::artifact::Metadata;
use crate::spec::{ExperimentSpec, Kind};

/// Default worker count when neither the flag nor the spec sets one.
const WORKERS_ENV: &str = "REIGATE_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] reigate::Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn is_validation(&self) -> bool {
        match self {
            CliError::Spec(_) => true,
            CliError::Core(e) => {
                matches!(e, reigate::Error::Invalid { .. } | reigate::Error::Parse(_) | reigate::Error::UnknownLabel(_))
            }
            CliError::Output(_) => false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "reigate", version, about = "Rare-earth-ion qubit gate simulations")]
struct Args {
    kind: Kind,
    /// Experiment spec (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to the spec, then REIGATE_WORKERS, then all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; falls back to the spec's `output`, then ./reigate-out/<kind>.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn workers(args: &Args, spec: &ExperimentSpec) -> Result<usize, CliError> {
    if let Some(n) = args.workers.or(spec.workers) {
        return if n == 0 { Err(CliError::Spec("workers must be at least 1".into())) } else { Ok(n) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Spec(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let spec = ExperimentSpec::load(&args.spec)?;
    spec.check(args.kind)?;
    let config_text = match &spec.ion_config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Spec(format!("{}: {e}", p.display())))?,
        None => DEFAULT_ION_CONFIG.to_string(),
    };
    let config = parse_ion_config(&config_text)?;
    let settings = IntegratorSettings {
        rel_tol: spec.tolerances.rel_tol,
        abs_tol: spec.tolerances.abs_tol,
        max_step: f64::INFINITY,
    };
    settings.validate()?;
    let seed = args.seed.or(spec.seed);
    let n_workers = workers(args, &spec)?;
    let out = args
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| PathBuf::from("reigate-out").join(args.kind.name()));
    let meta = Metadata::new(args.kind, seed, &config_text, spec.tolerances);
    let mut ctx = run::Context { spec: &spec, config, settings, seed, meta };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| CliError::Output(format!("worker pool: {e}")))?;
    let artifacts = pool.install(|| run::run(args.kind, &mut ctx))?;
    artifact::commit(&out, &artifacts)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = if e.is_validation() { "validation" } else { "runtime" };
            let report = serde_json::json!({ "error": { "kind": kind, "command": args.kind.name(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
