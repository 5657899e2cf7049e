//! Command-line driver for the trace-formula toolkit: cone tables, datum
//! classification, zeta and orbital evaluation, the fine geometric
//! expansion, the tori suite, and the acceptance verifier.

mod config;
mod report;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "rtf", version, about = "geometric trace-formula toolkit")]
struct Cli {
    /// Path to a TOML run configuration; a built-in default is used when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed override (defaults to the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for the verify suite.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the truncation indicator functions on a grid.
    Cones {
        /// Grid start (rational, e.g. "-5").
        #[arg(long, default_value = "-5", allow_hyphen_values = true)]
        min: String,
        /// Grid end.
        #[arg(long, default_value = "5", allow_hyphen_values = true)]
        max: String,
        /// Grid step.
        #[arg(long, default_value = "1/10")]
        step: String,
        /// Second argument for the two-variable Gamma functions.
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        x: String,
    },
    /// Classify the fiber over a rational point of the invariant base.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        t0: String,
        /// Discriminant (or squarefree core) of E.
        #[arg(long, allow_hyphen_values = true)]
        e_disc: i64,
    },
    /// Evaluate local and global Tate zeta integrals for the configured
    /// test functions and characters.
    Zeta,
    /// Evaluate local orbital integrals for the configured data.
    Orbital,
    /// Assemble the fine geometric expansion for the configured data.
    Expand,
    /// Run the rank-one tori classification table and finite identity
    /// suite.
    Tori,
    /// Run the acceptance suite; exit code 0 only if every criterion
    /// passes.
    Verify,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => toml::from_str(config::default_config_text()).context("built-in config")?,
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    let (payload, csv, code) = match cli.command {
        Command::Cones { min, max, step, x } => {
            let (v, c) = report::cones_table(&min, &max, &step, &x)?;
            (v, Some(c), 0)
        }
        Command::Classify { t0, e_disc } => (report::classify_point(&t0, e_disc)?, None, 0),
        Command::Zeta => (report::zeta_report(&cfg, seed)?, None, 0),
        Command::Orbital => (report::orbital_report(&cfg, seed)?, None, 0),
        Command::Expand => {
            let (v, c) = report::expand_report(&cfg, seed)?;
            (v, Some(c), 0)
        }
        Command::Tori => (report::tori_report(&cfg, seed)?, None, 0),
        Command::Verify => {
            let (v, ok) = report::verify_report(seed, cli.jobs);
            (v, None, if ok { 0 } else { 1 })
        }
    };
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&payload)? + "\n",
        Format::Csv => csv.unwrap_or_else(|| {
            // commands without a tabular form fall back to JSON
            serde_json::to_string_pretty(&payload).expect("serializable") + "\n"
        }),
    };
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(code)
}
