use std::process::ExitCode;

use clap::Parser;
use flexlp::cli::{Cli, THREADS_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("cannot set {THREADS_ENV}: {e}");
                }
            }
            _ => {
                eprintln!(
                    "error: config error: {THREADS_ENV} must be a positive integer, got `{v}`"
                );
                return ExitCode::from(2);
            }
        }
    }
    match flexlp::commands::execute(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
