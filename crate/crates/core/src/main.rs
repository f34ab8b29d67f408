use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskonly::cli::{run_study, validate_study, RunConfig, StudyError};

#[derive(Parser)]
#[command(name = "riskonly", about = "Risk-only portfolio backtests and concentration reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and its panel without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the version.
    Version,
}

fn execute(command: Command) -> Result<(), StudyError> {
    match command {
        Command::Run { config, out } => {
            let config = RunConfig::from_path(&config)?;
            let summary = run_study(&config, out.as_deref())?;
            for f in &summary.files {
                println!("{}", f.display());
            }
        }
        Command::Validate { config } => {
            let config = RunConfig::from_path(&config)?;
            let summary = validate_study(&config)?;
            println!(
                "ok: {} assets, {} months, {} evaluation months",
                summary.n_assets, summary.n_months, summary.evaluation_months
            );
        }
        Command::Version => println!("riskonly {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
