//! Data-parallel helpers. With the `parallel` feature (default) these run on
//! the rayon pool; without it they fall back to plain iteration. Results are
//! identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;
use crate::hashing::HashFunction;
use crate::sampler::sample_bset;
use crate::sets::{BSet, Subset};

pub(crate) fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    items.par_iter_mut().for_each(f);
    #[cfg(not(feature = "parallel"))]
    items.iter_mut().for_each(f);
}

pub(crate) fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Samples every set of a batch, preserving input order. Parallel over sets
/// when the `parallel` feature is on.
pub fn sample_stream(sets: &[BSet], h: &HashFunction, k: usize) -> Result<Vec<Vec<Subset>>> {
    map_collect(sets, |t| sample_bset(t, h, k))
        .into_iter()
        .collect()
}

/// Single-threaded [`sample_stream`], regardless of features.
pub fn sample_stream_sequential(
    sets: &[BSet],
    h: &HashFunction,
    k: usize,
) -> Result<Vec<Vec<Subset>>> {
    sets.iter().map(|t| sample_bset(t, h, k)).collect()
}

/// Whether the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
