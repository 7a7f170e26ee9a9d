use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracnls_cli::{commands, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fracnls", version, about = "Experiments for Toeplitz-plus-diagonal solvers of fractional NLS schemes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the second-level benchmark system(s) once.
    Solve(Args),
    /// Iteration count against the shift parameter.
    SweepOmega(Args),
    /// Eigenvalues or Ritz values of R and the preconditioned matrices.
    Spectrum(Args),
    /// Full time integration with conservation diagnostics.
    Evolve(Args),
    /// Iterations and wall time of several solvers across grid sizes.
    Bench(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::SweepOmega(a) => (Command::SweepOmega, a),
        Cmd::Spectrum(a) => (Command::Spectrum, a),
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::Bench(a) => (Command::Bench, a),
    };
    match execute(cmd, args) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fracnls {}: {e}", cmd.name());
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, args: Args) -> Result<serde_json::Value, CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    commands::run(cmd, &config, &args.out)
}
