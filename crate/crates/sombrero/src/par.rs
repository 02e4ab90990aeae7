//! Data-parallel building blocks with a sequential fallback.
//!
//! With the `parallel` feature (the default) the hot loops fan out over
//! rayon in coarse blocks of whole grid rows; without the feature every
//! entry point below degrades to its `_seq` twin. Both paths produce
//! bit-identical results: blocks are fixed-size, each block is processed
//! sequentially, and reductions combine per-block partials in block order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per parallel block. Small enough to split on a few cores, large
/// enough that task overhead stays negligible next to the FFT work.
pub const BLOCK_ROWS: usize = 16;

/// Run two closures, in parallel when the feature allows it.
#[inline]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Apply `f(start_index, block)` to consecutive blocks of `block_len`
/// elements (the tail block may be shorter).
#[inline]
pub fn for_each_block_mut<T, F>(data: &mut [T], block_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(block_len)
            .enumerate()
            .for_each(|(b, chunk)| f(b * block_len, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for_each_block_mut_seq(data, block_len, f);
    }
}

/// Sequential twin of [`for_each_block_mut`]; always available so the two
/// code paths can be benchmarked against each other in one build.
#[inline]
pub fn for_each_block_mut_seq<T, F>(data: &mut [T], block_len: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    for (b, chunk) in data.chunks_mut(block_len).enumerate() {
        f(b * block_len, chunk);
    }
}

/// Like [`for_each_block_mut`] over two equal-length buffers that must be
/// updated together (e.g. the two spinor components under a 2x2 factor).
#[inline]
pub fn for_each_block_mut2<T, F>(a: &mut [T], b: &mut [T], block_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T], &mut [T]) + Sync,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    {
        a.par_chunks_mut(block_len)
            .zip(b.par_chunks_mut(block_len))
            .enumerate()
            .for_each(|(i, (ca, cb))| f(i * block_len, ca, cb));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for_each_block_mut2_seq(a, b, block_len, f);
    }
}

/// Sequential twin of [`for_each_block_mut2`].
#[inline]
pub fn for_each_block_mut2_seq<T, F>(a: &mut [T], b: &mut [T], block_len: usize, f: F)
where
    F: Fn(usize, &mut [T], &mut [T]),
{
    for (i, (ca, cb)) in a.chunks_mut(block_len).zip(b.chunks_mut(block_len)).enumerate() {
        f(i * block_len, ca, cb);
    }
}

/// Deterministic block-wise map-reduce: `map` folds one block sequentially,
/// partial results are summed in block order.
#[inline]
pub fn sum_blocks<T, S, F>(data: &[T], block_len: usize, map: F) -> S
where
    T: Sync,
    S: Send + std::iter::Sum<S>,
    F: Fn(usize, &[T]) -> S + Sync,
{
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<S> = data
            .par_chunks(block_len)
            .enumerate()
            .map(|(b, chunk)| map(b * block_len, chunk))
            .collect();
        partials.into_iter().sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sum_blocks_seq(data, block_len, map)
    }
}

/// Sequential twin of [`sum_blocks`].
#[inline]
pub fn sum_blocks_seq<T, S, F>(data: &[T], block_len: usize, map: F) -> S
where
    S: std::iter::Sum<S>,
    F: Fn(usize, &[T]) -> S,
{
    data.chunks(block_len)
        .enumerate()
        .map(|(b, chunk)| map(b * block_len, chunk))
        .sum()
}

/// Configure the global thread pool from the `SOMB_THREADS` hint.
///
/// No-op when the variable is unset, unparsable, or the pool was already
/// built. Without the `parallel` feature this is always a no-op.
pub fn configure_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(val) = std::env::var("SOMB_THREADS") {
            if let Ok(n) = val.trim().parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}

/// Whether this build dispatches to rayon by default.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
