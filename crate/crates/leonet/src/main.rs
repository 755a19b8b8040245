use std::process::ExitCode;

use clap::Parser;
use leonet::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            eprintln!("runtime {:.3} s", outcome.runtime_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
