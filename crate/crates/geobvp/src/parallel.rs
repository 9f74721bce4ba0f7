//! Data-parallel fan-out with a sequential fallback.
//!
//! Batch work (seed scans, basis integrations, sampling sweeps) goes through
//! `batch_map`, which uses rayon when the `parallel` feature is enabled and
//! plain iteration otherwise. Results keep input order, so per-item
//! determinism is preserved either way. Reductions stay sequential in index
//! order; only independent items fan out.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when built with the `parallel` feature.
pub fn batch_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Always-sequential variant, kept for benchmarking both paths in one build.
pub fn batch_map_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Map over index range; convenience wrapper around `batch_map`.
pub fn batch_map_range<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    batch_map((0..count).collect(), f)
}

/// Configure the global rayon pool from an explicit cap (`GEOBVP_THREADS`).
/// No-op in sequential builds or when the pool is already initialized.
pub fn configure_threads(cap: Option<usize>) {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = cap {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cap;
    }
}
