//! Worker-count control. Every parallel loop in the crate writes to disjoint
//! outputs in a fixed order, so results do not depend on the pool size.

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `workers` threads (`0` picks the default).
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}
