use std::process::ExitCode;

use clap::Parser;
use hema_cli::app::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hema: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
