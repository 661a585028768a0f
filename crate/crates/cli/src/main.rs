mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure of a subcommand: bad flags exit with 2, run-time failures
/// with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(maxstable::Error),
}

impl From<maxstable::Error> for CliError {
    fn from(e: maxstable::Error) -> Self {
        match e {
            maxstable::Error::InvalidArgument(m) => CliError::Usage(m),
            e => CliError::Run(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::AssessError(a) => commands::assess_error(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Theta(a) => commands::theta(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            if let maxstable::Error::Runaway { partial, .. } = &e {
                eprintln!("partial field minimum: {}", partial.min());
            }
            ExitCode::from(1)
        }
    }
}
