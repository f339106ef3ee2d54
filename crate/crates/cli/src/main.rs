mod args;
mod commands;
mod output;

use std::process::ExitCode;

use addhaz::Error;
use clap::Parser;

use args::{Cli, Command};

/// Exit status per error class; clap itself exits with 2 on bad usage.
mod exit {
    pub const USAGE: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const ESTIMATION: u8 = 4;
    pub const COX: u8 = 5;
    pub const SIMULATION: u8 = 6;
    pub const OTHER: u8 = 1;
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::InvalidArgument(_) => exit::USAGE,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::EmptyFile
            | Error::MissingColumn { .. }
            | Error::NonNumeric { .. }
            | Error::InvalidTime { .. }
            | Error::InvalidEvent { .. }
            | Error::NoCovariates => exit::INPUT,
            Error::CoxNotConverged { .. } | Error::Separation { .. } => exit::COX,
            Error::InvalidScenario(_) | Error::TooManyFailures { .. } => exit::SIMULATION,
            _ => exit::ESTIMATION,
        };
    }
    if err.chain().any(|c| c.is::<std::io::Error>()) {
        exit::INPUT
    } else {
        exit::OTHER
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::InvalidArgument("--workers must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::R2(a) => commands::r2(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Split(a) => commands::split_command(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already embed their cause in the message
            let message = match e.downcast_ref::<Error>() {
                Some(core) => core.to_string(),
                None => format!("{e:#}"),
            };
            let message = message.replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_codes() {
        let code = |e: Error| exit_code(&e.into());
        assert_eq!(code(Error::MissingColumn { name: "t".into() }), exit::INPUT);
        assert_eq!(code(Error::NoFailures), exit::ESTIMATION);
        assert_eq!(code(Error::Separation { limit: 50.0 }), exit::COX);
        assert_eq!(code(Error::InvalidScenario("x".into())), exit::SIMULATION);
        assert_eq!(code(Error::InvalidArgument("x".into())), exit::USAGE);
        let io = anyhow::Error::new(std::io::Error::other("disk full")).context("cannot write out.csv");
        assert_eq!(exit_code(&io), exit::INPUT);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), exit::OTHER);
    }
}
