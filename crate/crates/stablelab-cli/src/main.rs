//! `stablelab`: batch driver for the robust stable CLT laboratory.
//!
//! Exit status: 0 when every check passes, 1 for usage errors (including
//! invalid configuration), 2 for numerical failures, 3 when an audit or
//! validation check fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use commands::{CliError, Output};

#[derive(Parser)]
#[command(name = "stablelab", version, about = "Numerical laboratory for the robust alpha-stable CLT")]
struct Cli {
    /// Worker threads for the scheme (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the tail conditions and the fitted decay exponent.
    Validate(Common),
    /// Convergence study of u_h(1,0) against a reference value.
    Converge(Common),
    /// Axiom, regularity, comparison and mollifier audits.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Seed of the randomized trials.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the proven rate for a grid of (alpha, beta).
    RateTable {
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 1.5, 1.8, 2.0, 2.5])]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 0.01)]
        eps0: f64,
        /// Also write rate_table.csv and rate_table.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Wall-clock data kept apart from the reproducible reports.
#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    elapsed_seconds: f64,
    pass: bool,
}

fn prepare(common: &Common) -> Result<(config::Validated, Output), CliError> {
    let validated = config::load(&common.config)?.validate()?;
    let dir =
        common.out.clone().or_else(|| validated.config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("stablelab-out"));
    Ok((validated, Output::create(dir)?))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let start = Instant::now();
    let (name, out, pass) = match &cli.command {
        Command::Validate(c) => {
            let (v, out) = prepare(c)?;
            let pass = commands::validate(&v, &out)?;
            ("validate", out, pass)
        }
        Command::Converge(c) => {
            let (v, out) = prepare(c)?;
            let pass = commands::converge(&v, &out)?;
            ("converge", out, pass)
        }
        Command::Audit { common, seed } => {
            let (v, out) = prepare(common)?;
            let pass = commands::audit(&v, &out, *seed)?;
            ("audit", out, pass)
        }
        Command::RateTable { alphas, betas, eps0, out } => {
            if !(*eps0 > 0.0) {
                return Err(CliError::Usage(format!("invalid value for `--eps0`: {eps0}")));
            }
            let rows = commands::rate_table(alphas, betas, *eps0)?;
            commands::write_rate_table(&rows, std::io::stdout().lock()).map_err(|e| CliError::Io(e.to_string()))?;
            if let Some(dir) = out {
                commands::save_rate_table(&rows, &Output::create(dir.clone())?)?;
            }
            return Ok(true);
        }
    };
    let meta =
        Metadata { command: name, version: env!("CARGO_PKG_VERSION"), elapsed_seconds: start.elapsed().as_secs_f64(), pass };
    out.json(&format!("{name}_metadata.json"), &meta)?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
