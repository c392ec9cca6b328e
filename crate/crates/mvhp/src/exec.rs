//! Execution strategy for data-parallel sections.
//!
//! With the default `parallel` feature the per-row fits, per-window pipeline
//! runs, and seed sweeps fan out over a rayon pool; without it the same
//! closures run sequentially. Outputs are collected in index order either
//! way, so results are bit-identical across both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to `0..n`, collecting results in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Cap the worker-thread count for all subsequent parallel sections. `None`
/// leaves the choice to the runtime (number of cores). Takes effect only the
/// first time a pool is created; later calls are ignored, matching the
/// underlying pool semantics. No-op in sequential builds.
pub fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        // Ignore the error: the global pool can only be built once, and a
        // second configuration attempt is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(100, |i| i * i);
        assert_eq!(out.len(), 100);
        for (i, &v) in out.iter().enumerate() {
            assert_eq!(v, i * i);
        }
    }

    #[test]
    fn map_indexed_empty() {
        let out: Vec<usize> = map_indexed(0, |i| i);
        assert!(out.is_empty());
    }
}
