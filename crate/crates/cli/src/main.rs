use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use turnpike_cli::{
    fmt_float, load_config, run_experiment, validate_config, ConfigError, Diagnostic, RunOptions,
    SCHEMA_VERSION,
};

const EXIT_IO: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "turnpike",
    about = "Turnpike experiments for fractional heat control with exterior data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the T-sweep described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 picks one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a config file and list every violation.
    Validate { config: PathBuf },
    /// Print the tool and schema versions.
    Version,
}

fn print_diagnostics(path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        match d.line {
            Some(line) => eprintln!("{}:{line}: {}: {}", path.display(), d.path, d.message),
            None => eprintln!("{}: {}: {}", path.display(), d.path, d.message),
        }
    }
}

fn run(config_path: &Path, out: Option<PathBuf>, jobs: usize) -> ExitCode {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(ConfigError::Invalid(diags)) => {
            print_diagnostics(config_path, &diags);
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    match run_experiment(&config, &RunOptions { out_dir: out, jobs }) {
        Ok(summary) => {
            for h in &summary.report.horizons {
                println!(
                    "T={} steps={} iterations={} cost={} gamma_hat={} r2={} envelope_pass={}",
                    h.horizon,
                    h.steps,
                    h.iterations,
                    fmt_float(h.cost),
                    fmt_float(h.gamma_hat),
                    fmt_float(h.r2),
                    h.envelope_pass
                );
            }
            println!("wrote {}", summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(EXIT_SOLVER)
            } else {
                ExitCode::from(EXIT_IO)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, jobs } => run(&config, out, jobs),
        Command::Validate { config } => match validate_config(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Ok(diags) => {
                print_diagnostics(&config, &diags);
                ExitCode::from(EXIT_INVALID_CONFIG)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INVALID_CONFIG)
            }
        },
        Command::Version => {
            println!(
                "turnpike {} (config schema {SCHEMA_VERSION})",
                env!("CARGO_PKG_VERSION")
            );
            ExitCode::SUCCESS
        }
    }
}
