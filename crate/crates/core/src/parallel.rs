//! Worker-count control. Results never depend on the count; it only bounds
//! how many threads a computation may use.

use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SAGE_THREADS";

/// Runs `f` inside a dedicated pool of `threads` workers.
pub fn with_threads<R, F>(threads: usize, f: F) -> Result<R>
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    if threads == 0 {
        return Err(Error::ConfigError("thread count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ConfigError(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Parses a worker count as given in [`THREADS_ENV`].
pub fn parse_threads(value: &str) -> Result<usize> {
    match value.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(Error::ConfigError(format!("{THREADS_ENV} must be a positive integer, got '{value}'"))),
    }
}

/// The worker count requested through the environment, if any.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => parse_threads(&v).map(Some),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::ConfigError(format!("{THREADS_ENV}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_size_is_respected() {
        assert_eq!(with_threads(3, rayon::current_num_threads).unwrap(), 3);
        assert!(with_threads(0, || ()).is_err());
    }

    #[test]
    fn thread_values() {
        assert_eq!(parse_threads("8").unwrap(), 8);
        assert!(parse_threads("0").is_err());
        assert!(parse_threads("many").is_err());
    }
}
