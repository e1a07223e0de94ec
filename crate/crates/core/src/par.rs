//! Deterministic data-parallel primitives.
//!
//! With the `parallel` feature the maps below run on rayon; without it they
//! run sequentially. Reductions always accumulate per fixed-size chunk and
//! merge the chunk partials in index order, so sums are bit-identical across
//! both modes and any thread count.

use num_complex::Complex64;

use crate::numerics::CMat;

/// Chunk length for deterministic reductions.
pub const CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Splits `0..n` into fixed chunks, folds each chunk locally, returns the
/// per-chunk partials in chunk order.
pub fn chunk_partials<T, I, F>(n: usize, init: I, fold: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, usize) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n);
        let mut acc = init();
        for i in lo..hi {
            fold(&mut acc, i);
        }
        acc
    })
}

/// Deterministic chunked sum of `f(i)` for `i` in `0..n`.
pub fn sum_f64<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    chunk_partials(n, || 0.0, |acc, i| *acc += f(i))
        .into_iter()
        .sum()
}

/// Deterministic chunked complex sum.
pub fn sum_complex<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    chunk_partials(n, || Complex64::new(0.0, 0.0), |acc, i| *acc += f(i))
        .into_iter()
        .sum()
}

/// Deterministic chunked complex vector sum; `fold` adds term `i` into the
/// accumulator in place.
pub fn sum_cvec<F>(n: usize, len: usize, fold: F) -> Vec<Complex64>
where
    F: Fn(&mut [Complex64], usize) + Sync,
{
    let partials = chunk_partials(
        n,
        || vec![Complex64::new(0.0, 0.0); len],
        |acc, i| fold(acc.as_mut_slice(), i),
    );
    let mut total = vec![Complex64::new(0.0, 0.0); len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Deterministic chunked matrix sum; `fold` adds term `i` into the
/// accumulator in place.
pub fn sum_cmat<F>(n: usize, rows: usize, cols: usize, fold: F) -> CMat
where
    F: Fn(&mut CMat, usize) + Sync,
{
    let partials = chunk_partials(n, || CMat::zeros(rows, cols), fold);
    let mut total = CMat::zeros(rows, cols);
    for p in partials {
        total.add_assign_mat(&p);
    }
    total
}
