use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trafficflow_cli::{run_file, CliError, Overrides};

#[derive(Parser)]
#[command(name = "trafficflow", version, about = "Macroscopic traffic flow studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact solution of one Riemann problem.
    Riemann(Common),
    /// Time integration with snapshots.
    Simulate(Common),
    /// Grid self-convergence study.
    Converge(Common),
    /// Refinement-based stability verdict.
    Stability(Common),
    /// Multi-commodity network simulation.
    Network(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cell count, or comma-separated doubling sizes for studies.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    scheme: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::new("usage", e.to_string().lines().next().unwrap_or("").to_string());
            eprintln!("{}", err.line());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let (name, args) = match cli.command {
        Command::Riemann(a) => ("riemann", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Converge(a) => ("converge", a),
        Command::Stability(a) => ("stability", a),
        Command::Network(a) => ("network", a),
    };
    let overrides = Overrides {
        seed: args.seed,
        grid: args.grid,
        scheme: args.scheme,
    };
    match run_file(name, &args.scenario, args.out.as_deref(), &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
