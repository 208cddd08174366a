use std::process::ExitCode;

use clap::Parser;

use sortnetc::cli::{run, Cli};

/// Overrides the worker count for parallel sections. Results never
/// depend on it; only wall time does.
const THREADS_VAR: &str = "SORTNETC_THREADS";

fn main() -> ExitCode {
    if let Ok(text) = std::env::var(THREADS_VAR) {
        match text.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("{THREADS_VAR} must be a positive integer, got {text:?}");
                return ExitCode::FAILURE;
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            print!("{}", output.rendered());
            ExitCode::SUCCESS
        }
        Err(err) => {
            let payload = serde_json::json!({"error": err.to_string()});
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
