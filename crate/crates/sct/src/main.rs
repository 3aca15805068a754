use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sct::cli::Cli::parse();
    match sct::cli::run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
