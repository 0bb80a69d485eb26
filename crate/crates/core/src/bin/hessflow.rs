use std::process::ExitCode;

use clap::Parser;
use hessflow::cli::{configure_threads, run, Cli, RunConfig, EXIT_CONFIG};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    ExitCode::from(run(&RunConfig::from(cli)) as u8)
}
