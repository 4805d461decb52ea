use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrinv::config::{BranchSelection, ScenarioConfig};
use lrinv::scenario::{run_verb, Report, Verb};

#[derive(Parser)]
#[command(
    name = "lrinv",
    version,
    about = "Lewis-Riesenfeld solutions for a time-dependent linear potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coefficient equations and build the analytic solutions.
    Solve(RunArgs),
    /// Run the full pipeline and check it against the numerical propagator.
    Validate(RunArgs),
    /// Decide whether the quadratic invariant is a multiple of a squared linear one.
    MatchSquare(RunArgs),
    /// Propagate the configured Gaussian packet with the split-step method.
    Propagate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` from the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Invariant branch; overrides `branch` from the scenario.
    #[arg(long, value_enum)]
    branch: Option<BranchArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Linear,
    Quadratic,
    Both,
}

impl From<BranchArg> for BranchSelection {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Linear => BranchSelection::Linear,
            BranchArg::Quadratic => BranchSelection::Quadratic,
            BranchArg::Both => BranchSelection::Both,
        }
    }
}

fn print_summary(report: &Report) {
    for c in &report.checks {
        let mark = if c.passed() { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<32} {:.3e} (tolerance {:.1e})",
            c.name, c.value, c.tolerance
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    println!("{}: {}", report.verb.name(), report.status().name());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, args) = match cli.command {
        Command::Solve(a) => (Verb::Solve, a),
        Command::Validate(a) => (Verb::Validate, a),
        Command::MatchSquare(a) => (Verb::MatchSquare, a),
        Command::Propagate(a) => (Verb::Propagate, a),
    };
    let mut cfg = match ScenarioConfig::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(b) = args.branch {
        cfg.branch = b.into();
    }
    let out = args.out.unwrap_or_else(|| cfg.out.clone());
    match run_verb(verb, &cfg, &out) {
        Ok(report) => {
            print_summary(&report);
            ExitCode::from(report.status().exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
