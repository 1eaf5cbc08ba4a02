//! `fishforge` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric
//! failure (divergence, failed generation).

mod args;
mod data;
mod model;
mod output;
mod report;

use std::process::ExitCode;

use clap::Parser;
use fishforge::ErrorKind;

use args::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => data::generate(a),
        Command::PreviewAugment(a) => data::preview_augment(a),
        Command::Train(a) => model::train(a),
        Command::Eval(a) => model::eval(a),
        Command::Embed(a) => model::embed(a),
        Command::Ablation(a) => model::ablation(a),
        Command::Calibrate(a) => report::calibrate(a),
        Command::Condition(a) => report::condition(a),
        Command::Agreement(a) => report::agreement(a),
        Command::ByCount(a) => report::by_count(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fishforge::Error>() {
            return match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Io => 3,
                ErrorKind::Numeric => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<output::UsageError>().is_some() {
            return 2;
        }
    }
    3
}

/// The error chain joined with ": ", skipping causes whose text the
/// previous message already includes.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", message(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
