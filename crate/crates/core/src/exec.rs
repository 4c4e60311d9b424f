//! Data-parallel map helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the hot loops fan out over
//! rayon; without it they run sequentially with identical results.
//! Output order is always the input order, and reductions are performed
//! over the collected vector in a fixed order, so results do not depend
//! on thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, preserving index order.
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

/// Map `f` over a slice, preserving order.
pub fn map_slice<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential variants, always available; the criterion bench suite
/// compares these against the parallel path.
pub mod seq {
    pub fn map_indexed<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }

    pub fn map_slice<I, T, F: Fn(&I) -> T>(items: &[I], f: F) -> Vec<T> {
        items.iter().map(f).collect()
    }
}
