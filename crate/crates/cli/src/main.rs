//! `longrun` — drive simulation and estimation experiments from a TOML
//! config, one command per process.
//!
//! Exit codes: 0 when the analysis completed (whatever its verdict), 2 when
//! the configuration was rejected before anything ran, 3 when the run itself
//! failed (partial outputs are removed; `error_report.txt` is kept).

mod commands;
mod config;
mod suite;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::CliError;

#[derive(Parser)]
#[command(
    name = "longrun",
    version,
    about = "Monte Carlo growth, failure-decay, and utility analysis for Markovian log-price models"
)]
struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results never depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Override one config key, e.g. `--set gdpf.paths=50000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path ensemble and write every checkpoint row.
    Simulate,
    /// Long-run growth rate from one long path, with batch-means errors.
    Ergodic,
    /// Tilted-growth curve and its convex-conjugate rate function.
    Scgf,
    /// Certify geometric decay of the probability of under-performing.
    Gdpf,
    /// Expected-utility growth or decay across horizons.
    Utility,
    /// Audit the standing model assumptions.
    Verify,
    /// Search for a geometric drift certificate.
    DriftCheck,
    /// Run the built-in example models end-to-end and summarize.
    PaperSuite,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate => "simulate",
        Command::Ergodic => "ergodic",
        Command::Scgf => "scgf",
        Command::Gdpf => "gdpf",
        Command::Utility => "utility",
        Command::Verify => "verify",
        Command::DriftCheck => "drift-check",
        Command::PaperSuite => "paper-suite",
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}

fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return 3;
        }
    }
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if matches!(cli.command, Command::PaperSuite) {
        if cli.config.is_some() || cli.seed.is_some() || !cli.set.is_empty() {
            eprintln!(
                "note: paper-suite pins its scenario configurations; \
                 --config, --seed, and --set are ignored"
            );
        }
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("longrun-out"));
        return suite::run_paper_suite(&out);
    }

    let loaded = config::load(cli.config.as_deref(), &cli.set, cli.seed, cli.out.as_deref())?;
    let name = command_name(&cli.command);
    commands::in_outdir(&loaded.cfg.out_dir(), &loaded.doc, name, |od| match cli.command {
        Command::Simulate => commands::run_simulate(&loaded.cfg, od),
        Command::Ergodic => commands::run_ergodic(&loaded.cfg, od).map(drop),
        Command::Scgf => commands::run_scgf(&loaded.cfg, od),
        Command::Gdpf => commands::run_gdpf(&loaded.cfg, od).map(drop),
        Command::Utility => commands::run_utility(&loaded.cfg, od).map(drop),
        Command::Verify => commands::run_verify(&loaded.cfg, od).map(drop),
        Command::DriftCheck => commands::run_drift_check(&loaded.cfg, od).map(drop),
        Command::PaperSuite => unreachable!("handled above"),
    })
}
