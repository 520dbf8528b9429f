//! Data-parallel helpers for embarrassingly parallel batches: seed sweeps,
//! oracle comparisons, and benchmark workloads.
//!
//! With the `parallel` feature (default) the work is distributed across a
//! rayon pool; without it the same API degrades to a plain sequential loop,
//! which keeps the crate usable on targets where threads are unwelcome.
//! Results are returned in input order either way, so callers observe no
//! semantic difference.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// True when this build actually fans work out across threads.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Apply `f` to every item and collect the results in input order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Apply `f` to every item and collect the results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Run independent jobs keyed by an integer range (typically seeds) and
/// collect `(key, result)` pairs in ascending key order.
pub fn run_keyed<U, F>(keys: std::ops::RangeInclusive<u64>, f: F) -> Vec<(u64, U)>
where
    U: Send,
    F: Fn(u64) -> U + Sync + Send,
{
    map_collect(keys.collect(), |k| (k, f(k)))
}
