use clap::Parser;
use drqmc::cli::{run, Cli};

/// Worker-pool size override; defaults to the rayon heuristic.
const WORKERS_ENV: &str = "DRQMC_WORKERS";

fn main() {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("{WORKERS_ENV} must be a positive integer, got `{v}`");
                std::process::exit(1);
            }
        }
    }

    let cli = Cli::parse();
    match run(&cli, std::io::stdout().lock()) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
