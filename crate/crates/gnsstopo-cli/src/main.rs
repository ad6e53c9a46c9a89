//! `gnsstopo`: batch scheduling, evaluation and comparison over the states
//! of one scenario.
//!
//! Exit codes: 0 success, 2 usage, 3 input (unreadable or malformed
//! files), 4 infeasible, 5 timeout without a schedule.

mod common;
mod compare;
mod evaluate;
mod output;
mod schedule;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::common::Failure;

#[derive(Debug, Parser)]
#[command(name = "gnsstopo", version, about = "Topology design for time-slotted satellite networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design one topology schedule per state.
    Schedule(schedule::ScheduleArgs),
    /// Simulate stored schedules and write delay reports.
    Evaluate(evaluate::EvaluateArgs),
    /// Tabulate evaluation reports side by side.
    Compare(compare::CompareArgs),
    /// Write a synthetic constellation scenario.
    Synth(synth::SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schedule(a) => schedule::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Compare(a) => compare::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
