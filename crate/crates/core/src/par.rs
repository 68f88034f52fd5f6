//! Mode-parallel map with deterministic ordering.

use alloc::vec::Vec;

/// Applies `f` to `0..n` and collects the results in index order.
///
/// With the `parallel` feature the calls run on the rayon pool; the output
/// order (and hence every downstream reduction) is the same either way.
#[cfg(feature = "parallel")]
pub(crate) fn map_modes<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_modes<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Like [`map_modes`] for fallible closures; the first error in index order wins.
pub(crate) fn try_map_modes<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_modes(n, f).into_iter().collect()
}
