//! `drbn`: train, query and apply deep regression Bayesian networks.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 training divergence or numerical failure.

mod args;
mod data;
mod images;
mod query;
mod train;

use std::process::ExitCode;

use clap::Parser;
use drbn_core::Error;

use args::{Cli, Command};

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::Unsupported(_) | Error::EnumerationCap { .. } => 1,
            Error::Domain(_) | Error::Shape(_) | Error::Parse { .. } | Error::Persistence(_) | Error::Io { .. } => 2,
            Error::Divergence { .. } | Error::Numerical(_) | Error::Internal(_) => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

pub type CmdResult = Result<(), Failure>;

fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => train::train(a, seed),
        Command::Finetune(a) => train::finetune(a, seed),
        Command::Benchmark(a) => train::benchmark(a, seed),
        Command::Classify(a) => query::classify(a, seed.unwrap_or(0)),
        Command::Infer(a) => query::infer(a, seed.unwrap_or(0)),
        Command::Loglik(a) => query::loglik(a, seed.unwrap_or(0)),
        Command::Restore(a) => images::restore(a, seed.unwrap_or(0)),
        Command::Reconstruct(a) => images::reconstruct(a, seed.unwrap_or(0)),
        Command::Generate(a) => images::generate(a, seed.unwrap_or(0)),
        Command::Corrupt(a) => images::corrupt(a, seed.unwrap_or(0)),
        Command::Psnr(a) => images::psnr(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
