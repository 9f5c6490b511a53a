mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};
use needle_core::curvature::Verdict;
use serde::Serialize;
use serde_json::json;

use crate::io::{config_err, sidecar_path, write_atomic, ConfigError};

#[derive(Debug, Clone, Copy, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve W1, extract rays and assemble the ray-wise monotone map.
    SolveMonge,
    /// Transport rays, branching sets, disintegration and balance.
    Decompose,
    /// One-dimensional CD(K, N) check of a density.
    CheckCd,
    /// MCP(K, N) density bounds.
    CheckMcp,
    /// Candidate-search isoperimetric profile.
    Profile,
    /// Empirical profile against the model profile I_{K,N,D}.
    LevyGromov,
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "needle", version, about = "Needle decomposition and curvature checks on finite metric measure spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Space spec JSON (density checks also take a t,h CSV).
    #[arg(long, global = true)]
    pub space: Option<PathBuf>,
    /// Marginals JSON: {"mu0": .., "mu1": ..} or {"f": ..}, arrays or keyed by point id.
    #[arg(long, global = true)]
    pub marginals: Option<PathBuf>,
    #[arg(long = "K", global = true, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long = "N", global = true)]
    pub n: Option<f64>,
    /// Model diameter; defaults to the diameter of the space. Accepts "inf".
    #[arg(long = "D", global = true)]
    #[serde(serialize_with = "opt_ext")]
    pub d: Option<f64>,
    /// Comma-separated volume fractions.
    #[arg(long = "v-grid", global = true)]
    pub v_grid: Option<String>,
    /// Saturation tolerance for decompositions, relative slack for density checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report path; sidecar CSVs are written next to it. Stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (NEEDLE_THREADS takes precedence).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Random tuples for density checks.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub samples: usize,
    /// Use every stride-th grid node instead of random tuples.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Candidate sets per volume in profile searches.
    #[arg(long, global = true, default_value_t = 48)]
    pub candidates: usize,
    /// Relative Levy-Gromov allowance.
    #[arg(long, global = true)]
    pub allowance: Option<f64>,
    /// Comma-separated criterion numbers for selftest.
    #[arg(long, global = true)]
    pub criteria: Option<String>,
}

fn opt_ext<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => needle_core::report::ext_float::serialize(x, s),
        None => s.serialize_none(),
    }
}

impl Cli {
    pub fn v_grid(&self) -> Result<Vec<f64>> {
        let Some(text) = &self.v_grid else {
            return Ok(vec![0.25, 0.5, 0.75]);
        };
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| config_err(format!("bad --v-grid entry {s:?}"))))
            .collect()
    }
}

fn threads(cli: &Cli) -> Result<Option<usize>> {
    match std::env::var("NEEDLE_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n = v.trim().parse().map_err(|_| config_err(format!("NEEDLE_THREADS={v:?} is not a count")))?;
            Ok(Some(n))
        }
        _ => Ok(cli.threads),
    }
}

fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<needle_core::Error>() {
            return err.code();
        }
        if cause.is::<ConfigError>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return "config";
        }
        if cause.is::<std::io::Error>() || cause.is::<tempfile::PersistError>() {
            return "io";
        }
    }
    "error"
}

fn run(cli: &Cli) -> Result<Option<Verdict>> {
    let start = Instant::now();
    if let Some(n) = threads(cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_err(format!("thread pool: {e}")))?;
    }
    let outcome = commands::dispatch(cli)?;
    let report = json!({
        "command": cli.command,
        "verdict": outcome.verdict,
        "result": outcome.result,
        "manifest": {
            "versions": {"needle": env!("CARGO_PKG_VERSION"), "needle_core": needle_core::VERSION},
            "seed": cli.seed,
            "config": cli,
            "wall_time_seconds": start.elapsed().as_secs_f64(),
        },
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match &cli.out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            for (suffix, bytes) in &outcome.sidecars {
                write_atomic(&sidecar_path(path, suffix), bytes)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(outcome.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Some(Verdict::Fail)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", error_code(&e));
            ExitCode::from(1)
        }
    }
}
