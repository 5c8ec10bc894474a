//! Fixed-order chunked evaluation: the backbone of bitwise-reproducible
//! parallelism.
//!
//! Work over `n` items is split into chunks whose boundaries depend only on
//! `n`. Each chunk is evaluated independently (in parallel when requested),
//! and the per-chunk results are always combined *sequentially in chunk
//! order* by the caller. Floating-point accumulation order is therefore a
//! pure function of the problem size — results are bitwise identical
//! whether the chunk evaluations ran on one thread or many.

use rayon::prelude::*;
use std::ops::Range;

/// Number of items per chunk. Large enough to amortize scheduling, small
/// enough to load-balance the quadrature/element loops that use it.
pub const CHUNK_SIZE: usize = 256;

/// Chunk boundaries for `n` items: `[0, C), [C, 2C), …` — a function of `n`
/// alone.
pub fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(CHUNK_SIZE))
        .map(|k| k * CHUNK_SIZE..((k + 1) * CHUNK_SIZE).min(n))
        .collect()
}

/// Evaluate `eval` on every chunk of `0..n` and return the results in chunk
/// order. `parallel` only decides *where* chunks run, never the order of the
/// returned vector, so downstream sequential folds are deterministic.
pub fn map_chunks<R, F>(n: usize, parallel: bool, eval: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync + Send,
{
    let ranges = chunk_ranges(n);
    if parallel {
        ranges.into_par_iter().map(eval).collect()
    } else {
        ranges.into_iter().map(eval).collect()
    }
}

/// Chunked sum of `f(i)` over `0..n`, folded in fixed order.
pub fn sum_chunks<F>(n: usize, parallel: bool, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    map_chunks(n, parallel, |range| {
        let mut acc = 0.0;
        for i in range {
            acc += f(i);
        }
        acc
    })
    .into_iter()
    .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_exactly() {
        for n in [0, 1, CHUNK_SIZE - 1, CHUNK_SIZE, CHUNK_SIZE + 1, 5 * CHUNK_SIZE + 17] {
            let ranges = chunk_ranges(n);
            let mut next = 0;
            for r in &ranges {
                assert_eq!(r.start, next);
                assert!(r.end > r.start);
                next = r.end;
            }
            assert_eq!(next, n);
        }
    }

    #[test]
    fn parallel_and_serial_sums_are_bitwise_equal() {
        // The summands are chosen so that a different accumulation order
        // would actually change the rounded result.
        let f = |i: usize| ((i as f64) * 0.7).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let n = 10_000;
        let serial = sum_chunks(n, false, f);
        let parallel = sum_chunks(n, true, f);
        assert_eq!(serial.to_bits(), parallel.to_bits());
    }
}
