use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fractus::problem::load_problem;
use fractus::run::{run, CliCommand};

#[derive(Parser)]
#[command(name = "fractus", about = "Multi-order fractional Cauchy problems", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Problem file (flat key = value sections)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for CSV files
    #[arg(long)]
    out: PathBuf,
    /// Override the grid node count from the spec
    #[arg(long)]
    n: Option<usize>,
    /// Override the grid grading exponent from the spec
    #[arg(long)]
    grading: Option<f64>,
    /// Override the solver tolerance from the spec
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Picard iteration for the initial value problem
    Solve(RunArgs),
    /// State-transition tableau blocks at the final time
    Transition(RunArgs),
    /// Variation-of-constants solution of a linear problem
    Duhamel(RunArgs),
    /// Left-right tableau discrepancy
    Duality(RunArgs),
    /// A priori kernel amplitude bound
    Theta(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = match cli.cmd {
        Command::Solve(a) => (CliCommand::Solve, a),
        Command::Transition(a) => (CliCommand::Transition, a),
        Command::Duhamel(a) => (CliCommand::Duhamel, a),
        Command::Duality(a) => (CliCommand::Duality, a),
        Command::Theta(a) => (CliCommand::Theta, a),
    };
    let mut spec = match load_problem(&args.spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(g) = args.grading {
        spec.grading = g;
    }
    if let Some(tol) = args.tol {
        spec.tol = tol;
    }
    ExitCode::from(run(cmd, &spec, &args.out) as u8)
}
