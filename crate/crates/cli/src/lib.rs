//! Command line front end for kglit.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 infeasible or
//! domain error, 4 I/O, parse or checkpoint error, 5 numerical failure.
//! Failures print one line `error[<category>]: <message>` to stderr.

pub mod commands;
pub mod manifest;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use kglit::KgError;

pub use commands::*;

#[derive(Debug, Parser)]
#[command(name = "kglit", version, about = "Knowledge-graph embeddings with numerical literals")]
#[command(after_help = "Environment:\n  KGLIT_WORKERS  worker threads for ranking (default: available cores)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded random knowledge graph.
    GenerateFixture(FixtureArgs),
    /// Add a random literal and a threshold class relation to a dataset.
    PrepareSynthetic(PrepareSyntheticArgs),
    /// Ablate literals or remove relational triples.
    Ablate(AblateArgs),
    /// Turn literals into quantile hierarchy entities and relations.
    Kga(KgaArgs),
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Filtered link prediction metrics, and Acc on synthetic datasets.
    Eval(EvalArgs),
    /// Fold report.json files into mean/std rows.
    Report(ReportArgs),
}

pub fn exit_code(e: &KgError) -> i32 {
    match e.category() {
        "config" => 2,
        "infeasible" | "domain" => 3,
        "numerical" => 5,
        _ => 4,
    }
}

pub fn dispatch(command: &Command) -> kglit::Result<()> {
    match command {
        Command::GenerateFixture(a) => cmd_fixture(a),
        Command::PrepareSynthetic(a) => cmd_prepare_synthetic(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Kga(a) => cmd_kga(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            exit_code(&e)
        }
    }
}
