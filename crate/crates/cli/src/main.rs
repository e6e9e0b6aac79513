//! `otloss` command-line interface.
//!
//! Subcommands: `score` (recipe-pair corpora to CSV/JSON reports), `loss`
//! (composite losses on tensor dumps), `gradcheck` (finite-difference
//! verification suites), and `train-toy` (deterministic toy training runs).
//!
//! Exit codes are stable: 0 success, 2 input parse error, 3 schema
//! violation, 4 shape mismatch, 5 check failure, 1 anything else.

use clap::{Parser, Subcommand};

mod check;
mod loss;
mod score;
mod train;

/// Error carrying the process exit code.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn shape(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }

    pub fn other(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<otloss::Error> for CliError {
    fn from(err: otloss::Error) -> Self {
        use otloss::Error;
        let code = match &err {
            Error::InvalidShape { .. }
            | Error::InvalidSpan { .. }
            | Error::InvalidToken { .. }
            | Error::NumericalFailure(_) => 4,
            Error::InvalidRecipe(_) | Error::EmptyReport => 3,
            _ => 1,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::other(format!("io error: {err}"))
    }
}

/// Maps a serde_json error to exit 2, keeping the line/column position.
pub fn json_parse_error(context: &str, err: &serde_json::Error) -> CliError {
    CliError::parse(format!(
        "malformed JSON in {context} at line {} column {}: {err}",
        err.line(),
        err.column()
    ))
}

#[derive(Parser)]
#[command(
    name = "otloss",
    version,
    about = "Composite recipe-generation losses and the recipe metric suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a recipe-pair corpus and write per-pair plus aggregate rows.
    Score(score::ScoreArgs),
    /// Evaluate a composite loss on tensor dumps and print value, components,
    /// and gradient norm as JSON.
    Loss(loss::LossArgs),
    /// Run the finite-difference gradient verification suites.
    Gradcheck(check::GradcheckArgs),
    /// Train the toy model from a config file; writes trajectory CSV and a
    /// model JSON dump.
    TrainToy(train::TrainToyArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => score::run(args),
        Command::Loss(args) => loss::run(args),
        Command::Gradcheck(args) => check::run(args),
        Command::TrainToy(args) => train::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code as i32);
    }
}
