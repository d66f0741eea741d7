//! Replica fan-out.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs `f(0), ..., f(n-1)` on a pool of `threads` workers (the global
/// pool when `None`) and returns the results in replica order. Each
/// replica derives its randomness from its index alone, so the output
/// does not depend on the number of workers.
pub fn run_replicas<T, F>(n: u64, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let work = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match threads {
        None => work(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?
            .install(work),
    }
}
