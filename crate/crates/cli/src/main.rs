mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<aida::Error> for Failure {
    fn from(e: aida::Error) -> Self {
        use aida::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidConfig(_) => Failure::Usage(msg),
            E::Io { .. }
            | E::Csv(_)
            | E::Parse { .. }
            | E::EmptyInput
            | E::Schema(_)
            | E::DimensionMismatch { .. }
            | E::SingleClass
            | E::EmptySubsample
            | E::ModelFormat(_) => Failure::Data(msg),
            _ => Failure::Internal(msg),
        }
    }
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let argv = config::merge_config_file(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let text = e.to_string();
            let text = text.trim_end();
            return Err(Failure::Usage(text.strip_prefix("error: ").unwrap_or(text).to_string()));
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    }
    commands::dispatch(&cli)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
