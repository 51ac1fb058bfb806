//! Execution strategy for data-parallel inner loops.
//!
//! With the `parallel` feature (default) the indexed maps run on rayon;
//! without it they run sequentially. Results are collected in index order
//! and reductions are integer-exact, so output is identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn indexed_map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn indexed_map<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Sum an integer-valued map over `0..n`. Integer addition is associative,
/// so the parallel reduction is deterministic.
#[cfg(feature = "parallel")]
pub fn indexed_sum_i64<F>(n: usize, f: F) -> i64
where
    F: Fn(usize) -> i64 + Sync + Send,
{
    (0..n).into_par_iter().map(f).sum()
}

/// Sum an integer-valued map over `0..n`.
#[cfg(not(feature = "parallel"))]
pub fn indexed_sum_i64<F>(n: usize, f: F) -> i64
where
    F: Fn(usize) -> i64,
{
    (0..n).map(f).sum()
}

/// Always-sequential twin of [`indexed_map`], kept as a benchmark baseline.
pub fn indexed_map_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Always-sequential twin of [`indexed_sum_i64`], kept as a benchmark baseline.
pub fn indexed_sum_i64_seq<F>(n: usize, f: F) -> i64
where
    F: Fn(usize) -> i64,
{
    (0..n).map(f).sum()
}
