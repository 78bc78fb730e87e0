//! `dhpe`: validate networks, simulate and generate load conditions,
//! estimate resistances and run Monte-Carlo studies.
//!
//! Exit status: 0 on success, 1 when the input is well-formed but rejected
//! (invalid topology, dimension mismatch, infeasible data), 2 on usage errors
//! and unreadable or malformed files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

mod commands;
mod conditions;

/// Input that could not be read or parsed.
#[derive(Debug)]
pub struct Malformed(pub String);

impl fmt::Display for Malformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Malformed {}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Malformed(format!("{}: {e}", path.display())).into())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Parser, Debug)]
#[command(name = "dhpe", version, about = "District heating resistance estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a network file against the structural assumptions.
    Validate {
        network: PathBuf,
    },
    /// Steady state for given boundary flows and differential pressure.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        resistances: PathBuf,
        /// Boundary flow per valve, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        flows: Vec<f64>,
        /// p_alpha - p_beta; defaults to the minimum feasible value.
        #[arg(long)]
        dp: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        p_alpha: f64,
        /// Also write the state as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate load conditions, add measurement noise, write CSV.
    Generate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        resistances: PathBuf,
        #[arg(long, value_parser = positive)]
        count: usize,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        flow_min: f64,
        #[arg(long, default_value_t = 200.0)]
        flow_max: f64,
        /// Upper end of the differential pressure multiplier.
        #[arg(long, default_value_t = 2.0)]
        headroom_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate resistances from a load-condition CSV.
    Estimate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        conditions: PathBuf,
        #[arg(long, default_value_t = dhpe::DEFAULT_RANK_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resistance file whose values are printed next to the estimates.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Rank, conditioning and unidentifiable parameter combinations.
    Identifiability {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        conditions: PathBuf,
        #[arg(long, default_value_t = dhpe::DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// Repeated simulate-noise-estimate trials; writes CSV summaries and SVG plots.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the table of a saved estimation result.
    Report {
        result: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { network } => commands::validate(&network),
        Command::Simulate {
            network,
            resistances,
            flows,
            dp,
            p_alpha,
            out,
        } => commands::simulate(&network, &resistances, &flows, dp, p_alpha, out.as_deref()),
        Command::Generate {
            network,
            resistances,
            count,
            epsilon,
            seed,
            flow_min,
            flow_max,
            headroom_max,
            out,
        } => {
            let settings = dhpe::TrialSettings {
                flow_range: (flow_min, flow_max),
                dp_headroom: (1.0, headroom_max),
                ..Default::default()
            };
            commands::generate(&network, &resistances, &settings, count, epsilon, seed, &out)
        }
        Command::Estimate {
            network,
            conditions,
            tol,
            out,
            truth,
        } => commands::estimate(&network, &conditions, tol, out.as_deref(), truth.as_deref()),
        Command::Identifiability {
            network,
            conditions,
            tol,
        } => commands::identifiability(&network, &conditions, tol),
        Command::Montecarlo { config, out } => commands::montecarlo(&config, &out),
        Command::Report { result, truth } => commands::report(&result, truth.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.chain().any(|e| e.is::<Malformed>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
