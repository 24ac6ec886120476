//! Command-line front end: system files, seeded sampling, and reports.

pub mod checks;
pub mod config;
pub mod file;
pub mod report;

pub use checks::{run_checks, MAX_RESAMPLES};
pub use config::{CheckId, Format, RunConfig, Tolerances};
pub use file::{load_system_file, parse_system_file, FileError, SurfaceSpec, SystemFile};
pub use report::{CheckReport, FailureDocument, Report, Row, Verdict};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "NORMALITY_LAB_THREADS";

/// A rayon pool sized by [`THREADS_VAR`], or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => b = b.num_threads(k),
            _ => return Err(format!("{THREADS_VAR} must be a positive integer, got '{v}'")),
        }
    }
    b.build().map_err(|e| e.to_string())
}

/// Loads `file` and runs `cfg` in a pool sized by the environment.
pub fn check_file(path: &std::path::Path, cfg: &RunConfig) -> Result<Report, FailureDocument> {
    cfg.validate().map_err(|m| FailureDocument::new("config", m))?;
    let file = load_system_file(path).map_err(|e| FailureDocument::new(e.kind(), e.to_string()))?;
    let pool = thread_pool().map_err(|m| FailureDocument::new("config", m))?;
    Ok(pool.install(|| run_checks(&file, cfg)))
}
