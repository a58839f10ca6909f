use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use gmkit_cli::args::Cli;
use gmkit_cli::{run, CliError};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(CliError::Usage(String::new()).exit_code()),
            };
        }
    };
    match run(&cli.command) {
        Ok(envelope) => {
            let text = if cli.table { envelope.to_table() } else { envelope.to_json() + "\n" };
            // a closed pipe (e.g. `| head`) is not a failure of the command
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
