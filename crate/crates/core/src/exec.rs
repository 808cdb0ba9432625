//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose partial results are combined in
//! chunk order, so the serial and parallel paths produce bit-identical output
//! regardless of the number of worker threads.

use std::ops::Range;

/// Execution mode for data-parallel loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Serial,
    /// Uses rayon when the `parallel` feature is enabled, otherwise serial.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Maps `f` over chunks of `0..n` and returns the partial results in order.
pub fn map_chunks<T, F>(exec: Exec, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(n, chunk);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = exec;
    ranges.into_iter().map(f).collect()
}

/// Chunked sum of `f(i)` over `0..n` into a dense vector of length `len`.
pub fn accumulate<F>(exec: Exec, n: usize, chunk: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let parts = map_chunks(exec, n, chunk, |range| {
        let mut buf = vec![0.0; len];
        for i in range {
            f(i, &mut buf);
        }
        buf
    });
    let mut out = vec![0.0; len];
    for part in parts {
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    out
}

/// Chunked scalar sum of `f(i)` over `0..n`.
pub fn sum<F>(exec: Exec, n: usize, chunk: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(exec, n, chunk, |range| range.map(&f).sum::<f64>())
        .into_iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = sum(Exec::Serial, 10_001, 97, f);
        let b = sum(Exec::Parallel, 10_001, 97, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn accumulate_matches_direct_loop() {
        let v = accumulate(Exec::Parallel, 100, 7, 5, |i, buf| buf[i % 5] += i as f64);
        let mut w = vec![0.0; 5];
        for i in 0..100 {
            w[i % 5] += i as f64;
        }
        assert_eq!(v, w);
    }
}
