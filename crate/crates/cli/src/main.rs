//! `medcorr`: simulate mediation data, fit structured mediator-selection
//! models, and score or diagnose the results.

mod commands;
mod config;
mod failure;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use medcorr::fit::Method;

use config::{Overrides, RunConfig};
use failure::Failure;

/// Environment variable holding the worker count for parallel chains.
const THREADS_VAR: &str = "MEDCORR_THREADS";

#[derive(Parser)]
#[command(
    name = "medcorr",
    version,
    about = "Bayesian high-dimensional mediation analysis with correlated mediators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate data sets and ground truth from a simulation design.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run MCMC chains and write PIPs, selections and effect estimates.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory with A.csv, M.csv, Y.csv and optional C.csv.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a fitted PIP table against simulated truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// pip.csv written by `fit`.
        #[arg(long)]
        report: PathBuf,
        /// truth.csv written by `simulate`.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Convergence diagnostics over the chains written by `fit`.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Directory holding chain_NN subdirectories [default: <out>/chains].
        traces: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gmm, potts or corrs.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Target false discovery rate for selection.
    #[arg(long)]
    fdr: Option<f64>,
    /// Edge list for the Potts prior.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Correlation matrix (potts) or structure matrix (corrs), as CSV.
    #[arg(long)]
    corr_matrix: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, data: Option<PathBuf>) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides {
            method: self.method,
            seed: self.seed,
            out: self.out.clone(),
            chains: self.chains,
            iterations: self.iterations,
            burnin: self.burnin,
            thin: self.thin,
            fdr: self.fdr,
            graph: self.graph.clone(),
            corr_matrix: self.corr_matrix.clone(),
            data,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::validation(format!(
            "{THREADS_VAR} must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::runtime(format!("cannot start {n} workers: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Simulate { common } => commands::simulate(&common.resolve(None)?),
        Command::Fit { common, data } => commands::fit(&common.resolve(data)?),
        Command::Evaluate {
            common,
            report,
            truth,
        } => commands::evaluate(&common.resolve(None)?, &report, &truth),
        Command::Diagnose { common, traces } => {
            let cfg = common.resolve(None)?;
            let dir = traces.unwrap_or_else(|| cfg.out.join("chains"));
            commands::diagnose(&cfg, &dir)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
