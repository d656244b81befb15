use clap::Parser;
use dcgh::cli::{run, Cli};
use std::process::ExitCode;

fn configure_threads() -> Result<(), String> {
    match std::env::var("DCGH_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| format!("DCGH_THREADS must be an integer, got {raw:?}"))?;
            if n > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| format!("thread pool: {e}"))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::FAILURE;
    }
    match run(Cli::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
