//! Command-line pipeline: generate data, train, filter, evaluate, sweep
//! observation noise and measure throughput. Every command writes its
//! outputs under `--out` and is deterministic for fixed seeds.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;

pub use args::{Cli, Command};
pub use error::{CliError, Result};

/// Environment variable capping the worker count; 0 or unset means automatic.
pub const THREADS_ENV: &str = "NLBENCH_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`]. Call once, before any
/// parallel work.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::invalid(format!(
            "{THREADS_ENV} must be a non-negative integer, got '{raw}'"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs one parsed command. Returns the paths or reports it produced as a
/// short human-readable line.
pub fn run(cli: &Cli) -> Result<String> {
    Ok(match &cli.command {
        Command::Generate(a) => {
            let written = commands::generate(a)?;
            let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            format!("wrote {}", names.join(", "))
        }
        Command::Train(a) => format!("wrote {}", commands::train(a)?.display()),
        Command::Filter(a) => format!("wrote {}", commands::filter(a)?.display()),
        Command::Evaluate(a) => format!(
            "scored {} runs into {}",
            commands::evaluate(a)?.len(),
            a.out.display()
        ),
        Command::SweepNoise(a) => format!(
            "wrote {} rows into {}",
            commands::sweep_noise(a)?.len(),
            a.out.display()
        ),
        Command::Bench(a) => {
            let reports = commands::bench(a)?;
            let parts: Vec<String> = reports
                .iter()
                .map(|r| format!("{}={:.1}", r.method, r.iter_per_sec))
                .collect();
            format!("iter/s {}", parts.join(" "))
        }
    })
}
