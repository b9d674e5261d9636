//! `contagion`: command-line runner for partnership-contagion studies.
//!
//! Verbs: `simulate` (scenario config -> dataset), `truth` (exact estimand
//! table), `estimate` (nonparametric estimates from a dataset), `compare`
//! (truth vs empirical agreement report), and `reproduce-tables` /
//! `reproduce-figures` (regenerate every bundled benchmark artifact).
//!
//! Exit codes: 0 success, 1 runtime failure (IO, numerics, failed
//! comparisons), 2 invalid configuration or unparseable input.

mod reproduce;
mod run;

use clap::{Parser, Subcommand};
use contagion_core::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "contagion", version, about = "Simulate two-person-partnership infection trials, tabulate exact causal estimand values, and check nonparametric estimates against them")]
struct Cli {
    /// Worker threads (default: CONTAGION_THREADS, else all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Chatty progress and per-row flags on stderr
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trial dataset from a scenario config
    Simulate {
        /// Scenario config: a file path or a bundled scenario name
        #[arg(long)]
        config: String,
        /// Dataset file to write (a .meta sidecar is written next to it)
        #[arg(long)]
        out: PathBuf,
        /// Override the config's random seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's number of partnerships
        #[arg(long)]
        n: Option<u64>,
    },
    /// Evaluate exact estimand values for a request list
    Truth {
        /// Scenario config: a file path or a bundled scenario name
        #[arg(long)]
        config: String,
        /// Request list CSV (kind,t,args)
        #[arg(long)]
        requests: PathBuf,
        /// Estimand table CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Override the config's random seed (standardization draws)
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo draws for covariate standardization
        #[arg(long)]
        draws: Option<u64>,
    },
    /// Estimate requested estimands from a simulated dataset
    Estimate {
        /// Dataset file written by `simulate`
        #[arg(long)]
        dataset: PathBuf,
        /// Request list CSV (kind,t,args)
        #[arg(long)]
        requests: PathBuf,
        /// Estimand table CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Estimator settings as a TOML file (all keys optional)
        #[arg(long, value_name = "PATH")]
        estimator_config: Option<PathBuf>,
        /// Equal-frequency covariate bins per dimension (0 = unadjusted)
        #[arg(long)]
        bins: Option<usize>,
        /// Fixed half-width for partner-time windows
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Focal subject views: one, two, or both
        #[arg(long)]
        subjects: Option<String>,
        /// Minimum views per stratum before estimating
        #[arg(long)]
        min_stratum: Option<usize>,
    },
    /// Compare a truth table against an empirical table row by row
    Compare {
        /// Truth estimand table CSV
        #[arg(long)]
        truth: PathBuf,
        /// Empirical estimand table CSV
        #[arg(long)]
        empirical: PathBuf,
        /// Comparison report CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the bundled benchmark tables end to end
    ReproduceTables {
        /// Output directory for per-scenario tables and the manifest
        #[arg(long, default_value = "tables")]
        out: PathBuf,
        /// Override every scenario's number of partnerships (smoke runs)
        #[arg(long)]
        n: Option<u64>,
        /// Monte Carlo draws for covariate standardization
        #[arg(long, default_value_t = 20_000)]
        draws: u64,
        /// Restrict to these bundled scenarios (repeatable)
        #[arg(long)]
        scenario: Vec<String>,
    },
    /// Regenerate the effect-curve CSVs for the bundled curve scenarios
    ReproduceFigures {
        /// Output directory for curve CSVs and the manifest
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
}

/// Thread override: `--threads` beats `CONTAGION_THREADS`; absent both,
/// rayon picks the core count.
fn thread_override(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CONTAGION_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(Error::config(format!(
                "CONTAGION_THREADS = {raw:?} is not a valid thread count"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(n) = thread_override(cli.threads)? {
        if n == 0 {
            return Err(Error::config("thread count must be >= 1"));
        }
        // A failure here means a pool already exists (only in tests); the
        // explicit request still matters, so surface impossible sizes.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let verbose = cli.verbose;
    match cli.command {
        Command::Simulate { config, out, seed, n } => {
            run::cmd_simulate(&config, &out, seed, n, verbose).map(|()| 0)
        }
        Command::Truth { config, requests, out, seed, draws } => {
            run::cmd_truth(&config, &requests, &out, seed, draws, verbose).map(|()| 0)
        }
        Command::Estimate {
            dataset,
            requests,
            out,
            estimator_config,
            bins,
            bandwidth,
            subjects,
            min_stratum,
        } => {
            let overrides = run::EstimateOverrides {
                estimator_config,
                bins,
                bandwidth,
                subjects,
                min_stratum,
            };
            run::cmd_estimate(&dataset, &requests, &out, overrides, verbose).map(|()| 0)
        }
        Command::Compare { truth, empirical, out } => {
            run::cmd_compare(&truth, &empirical, out.as_deref(), verbose)
        }
        Command::ReproduceTables { out, n, draws, scenario } => {
            reproduce::tables(&out, n, draws, &scenario, verbose)
        }
        Command::ReproduceFigures { out } => reproduce::figures(&out, verbose),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
