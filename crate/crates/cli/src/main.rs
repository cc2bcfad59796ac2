use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sosblock::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use sosblock_cli::{
    cmd_analyze, cmd_census, cmd_decompose, CensusOptions, CliError, DecomposeOptions, Method,
    SupportClass,
};

#[derive(Parser)]
#[command(
    name = "sosblock",
    version,
    about = "Block structure detection for sum-of-squares decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report supports and block partitions of a polynomial.
    Analyze {
        /// File holding the polynomial, or `-` for stdin.
        input: String,
    },
    /// Decide SOS-ness; exit 0 = SOS, 1 = not SOS, 2 = undetermined.
    Decompose {
        input: String,
        #[arg(long, default_value = "projection")]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Block-structure statistics over random SOS polynomials.
    Census {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        degree: u32,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value = "full")]
        support: SupportClass,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_input(path: &str) -> Result<String, String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| e.to_string())?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))
    }
}

fn max_iter() -> usize {
    match std::env::var("SOS_MAX_ITER") {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("ignoring unparsable SOS_MAX_ITER={v}");
            DEFAULT_MAX_ITER
        }),
        Err(_) => DEFAULT_MAX_ITER,
    }
}

fn emit(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string(value).expect("report serializes")
    );
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { input } => {
            let text = match read_input(&input) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            match cmd_analyze(&text) {
                Ok(report) => {
                    emit(&report);
                    ExitCode::SUCCESS
                }
                Err(e @ CliError::OddVertex(_)) => {
                    emit(&serde_json::json!({ "error": e.to_string() }));
                    ExitCode::from(1)
                }
                Err(e) => fail(e),
            }
        }
        Command::Decompose {
            input,
            method,
            tol,
            seed,
        } => {
            let text = match read_input(&input) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let opts = DecomposeOptions {
                method,
                tol,
                seed,
                max_iter: max_iter(),
            };
            match cmd_decompose(&text, &opts) {
                Ok(report) => {
                    emit(&report);
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Census {
            n,
            degree,
            samples,
            support,
            density,
            seed,
        } => {
            match cmd_census(&CensusOptions {
                n,
                degree,
                samples,
                support,
                density,
                seed,
            }) {
                Ok(report) => {
                    emit(&report);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
