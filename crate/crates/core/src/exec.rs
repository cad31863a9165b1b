//! Row-wise execution helpers shared by the parallel and sequential lanes.
//!
//! Both lanes produce bit-identical results: parallel loops only ever write
//! disjoint rows, and reductions accumulate per-row partials sequentially in
//! row order. This is what makes diagnostics CSVs reproducible byte-for-byte
//! regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each `row_len`-sized row of `data`, passing the row index.
#[cfg(feature = "parallel")]
pub fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    for (r, row) in data.chunks_mut(row_len).enumerate() {
        f(r, row);
    }
}

/// Like [`for_each_row_mut`] but with per-worker scratch storage.
#[cfg(feature = "parallel")]
pub fn for_each_row_scratch_mut<T, S, I, F>(data: &mut [T], row_len: usize, init: I, f: F)
where
    T: Send,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync,
{
    data.par_chunks_mut(row_len)
        .enumerate()
        .for_each_init(&init, |s, (r, row)| f(s, r, row));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row_scratch_mut<T, S, I, F>(data: &mut [T], row_len: usize, init: I, f: F)
where
    T: Send,
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) + Sync,
{
    let mut scratch = init();
    for (r, row) in data.chunks_mut(row_len).enumerate() {
        f(&mut scratch, r, row);
    }
}

/// Evaluate `f(row)` for every row index and collect the results in order.
#[cfg(feature = "parallel")]
pub fn row_map<F>(rows: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..rows).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn row_map<F>(rows: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..rows).map(f).collect()
}

/// Deterministic sum: per-row partials computed (possibly in parallel) and
/// combined sequentially in row order.
pub fn sum_rows<F>(rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    row_map(rows, f).iter().sum()
}

/// Deterministic max over per-row partials (NaN-propagating).
pub fn max_rows<F>(rows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    row_map(rows, f)
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| if b > a || b.is_nan() { b } else { a })
}
