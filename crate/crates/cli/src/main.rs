mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use output::{CliError, CliResult};

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("POLYWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::usage(format!("POLYWALK_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    match &cli.command {
        Command::Sample(a) => commands::sample_cmd(a),
        Command::Cdf(a) => commands::cdf_cmd(a),
        Command::Round(a) => commands::round_cmd(a),
        Command::Diagnose(a) => commands::diagnose_cmd(a),
        Command::Backtest(a) => commands::backtest_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code as u8)
        }
    }
}
