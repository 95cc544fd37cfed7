use std::process::ExitCode;

use clap::Parser;
use pavlov_lab::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.into_invocation().and_then(|inv| run(&inv)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pavlov: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
