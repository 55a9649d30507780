use std::process::ExitCode;

use clap::Parser;
use qsrt_cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let threads = std::env::var("QSRT_SIM_THREADS").ok();
    if let Err(e) = configure_threads(threads.as_deref()) {
        eprintln!("error: {}: {e}", e.name());
        return ExitCode::from(e.exit_code());
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", report.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
