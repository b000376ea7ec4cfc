//! Execution helpers: data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) the indexed map fans out on the
//! ambient rayon pool; without it the same call runs sequentially. Results
//! are always collected in index order, so output never depends on how many
//! worker threads ran.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every index in `0..n` and collect results in order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sequential twin of [`map_indexed`], kept available in all builds so
/// benchmarks can compare the two paths directly.
pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
