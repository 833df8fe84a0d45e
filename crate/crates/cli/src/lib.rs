//! Command-line front end for the `superres` library: parameter sweeps to
//! CSV, figure presets, and JSON validation reports.

pub mod error;
pub mod figures;
pub mod grid;
pub mod reports;
pub mod sweep;
pub mod table;

pub use error::{CliError, CliResult};

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "SUPERRES_THREADS";

/// Configures the global rayon pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("{THREADS_ENV} must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(e.to_string()))
}
