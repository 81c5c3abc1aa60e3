use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::Parser;
use rcdc_ems::cli::{execute, exit_code, Cli, EXIT_OK, EXIT_USAGE};
use rcdc_ems::EmsError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match run(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<EmsError>().map(exit_code).unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let what = match &cli.command {
        rcdc_ems::cli::Command::Simulate(_) => "simulate",
        rcdc_ems::cli::Command::Sweep(_) => "sweep",
        rcdc_ems::cli::Command::Synth(_) => "synth",
    };
    execute(cli, &mut out).with_context(|| format!("{what} failed"))
}
