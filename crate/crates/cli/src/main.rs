use std::process::ExitCode;

use clap::Parser;
use polysketch_cli::{run_command, CliError, RunConfig};

fn emit(config: &RunConfig, json: &str) -> Result<(), CliError> {
    match &config.report {
        Some(path) => std::fs::write(path, format!("{json}\n")).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not failures; every other parse error is a validation error.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let code = match run_command(&config) {
        Ok(report) => {
            let code = report.error.as_ref().map_or(0, |e| e.exit_code);
            if let Some(e) = &report.error {
                eprintln!("error: {}", e.message);
            }
            match emit(&config, &report.to_json()) {
                Ok(()) => code,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
