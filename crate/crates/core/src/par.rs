//! Order-preserving map helpers. Parallel on rayon with the `parallel`
//! feature, plain iterators otherwise. Results always come back in input
//! order so callers stay deterministic regardless of worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Applies `f` to every value in `lo..hi` and keeps the `Some` results, in
/// ascending order of the input value.
#[cfg(feature = "parallel")]
pub(crate) fn filter_map_range<R, F>(lo: u32, hi: u32, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u32) -> Option<R> + Sync + Send,
{
    (lo..hi).into_par_iter().filter_map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn filter_map_range<R, F>(lo: u32, hi: u32, f: F) -> Vec<R>
where
    F: Fn(u32) -> Option<R>,
{
    (lo..hi).filter_map(f).collect()
}
