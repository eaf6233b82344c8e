use std::process::ExitCode;

use weakmeas_cli::{config::SEED_ENV, main_with_args, CliError};

fn main() -> ExitCode {
    match main_with_args(std::env::args_os(), std::env::var(SEED_ENV).ok()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(CliError::Usage(e).exit_code() as u8)
        }
        Err(e) => {
            eprintln!("weakmeas: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
