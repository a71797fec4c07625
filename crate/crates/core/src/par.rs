//! Fork-join building blocks: blocked scans, stable counting/radix sorts and
//! a shared output buffer for scatter phases that write disjoint positions.

use rayon::prelude::*;
use std::cell::UnsafeCell;
use std::ops::{Add, Range};

/// Block length of the fixed blocking scheme used by [`inclusive_scan`].
pub const SCAN_BLOCK: usize = 1 << 14;

/// Splits `0..n` into `parts` contiguous ranges whose lengths differ by at
/// most one. Empty ranges are kept so the result always has `parts` entries.
pub fn balanced_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    (0..parts)
        .map(|p| (n * p / parts)..(n * (p + 1) / parts))
        .collect()
}

/// Runs `f(0..count)` on the rayon pool when `workers > 1`, sequentially otherwise.
pub fn for_each_task<F>(workers: usize, count: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    if workers <= 1 || count <= 1 {
        (0..count).for_each(f);
    } else {
        (0..count).into_par_iter().for_each(f);
    }
}

/// Like [`for_each_task`] but collects the per-task results in task order.
pub fn map_tasks<T, F>(workers: usize, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || count <= 1 {
        (0..count).map(f).collect()
    } else {
        (0..count).into_par_iter().map(f).collect()
    }
}

/// A slice that several tasks may write through concurrently, provided no two
/// tasks touch the same index.
pub struct SharedSlice<'a, T> {
    cells: &'a [UnsafeCell<T>],
}

unsafe impl<T: Send> Send for SharedSlice<'_, T> {}
unsafe impl<T: Send> Sync for SharedSlice<'_, T> {}

impl<'a, T> SharedSlice<'a, T> {
    pub fn new(slice: &'a mut [T]) -> Self {
        // SAFETY: UnsafeCell<T> has the same layout as T and we hold the
        // unique borrow for 'a.
        let cells = unsafe { &*(slice as *mut [T] as *const [UnsafeCell<T>]) };
        SharedSlice { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// # Safety
    /// No other task may read or write index `i` concurrently.
    #[inline]
    pub unsafe fn write(&self, i: usize, value: T) {
        *self.cells[i].get() = value;
    }

    /// # Safety
    /// No other task may write index `i` concurrently.
    #[inline]
    pub unsafe fn read(&self, i: usize) -> &T {
        &*self.cells[i].get()
    }
}

/// Inclusive prefix sums over a fixed blocking of [`SCAN_BLOCK`] elements.
///
/// Block totals are scanned sequentially, so the association order, and
/// therefore every rounded result, is the same for any worker count.
pub fn inclusive_scan<T>(values: &[T], workers: usize) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Send + Sync,
{
    let n = values.len();
    let mut out = vec![T::default(); n];
    if n == 0 {
        return out;
    }
    let blocks = n.div_ceil(SCAN_BLOCK);
    let totals: Vec<T> = map_tasks(workers, blocks, |b| {
        let lo = b * SCAN_BLOCK;
        let hi = (lo + SCAN_BLOCK).min(n);
        values[lo..hi]
            .iter()
            .copied()
            .fold(T::default(), |acc, v| acc + v)
    });
    let mut offsets = Vec::with_capacity(blocks);
    let mut acc = T::default();
    for &t in &totals {
        offsets.push(acc);
        acc = acc + t;
    }
    let run = |(b, chunk): (usize, &mut [T])| {
        let lo = b * SCAN_BLOCK;
        let mut acc = offsets[b];
        for (o, &v) in chunk.iter_mut().zip(&values[lo..]) {
            acc = acc + v;
            *o = acc;
        }
    };
    if workers <= 1 {
        out.chunks_mut(SCAN_BLOCK).enumerate().for_each(run);
    } else {
        out.par_chunks_mut(SCAN_BLOCK).enumerate().for_each(run);
    }
    out
}

/// Inclusive prefix sums of reals; see [`inclusive_scan`].
pub fn prefix_sums(values: &[f64], workers: usize) -> Vec<f64> {
    inclusive_scan(values, workers)
}

/// Stable counting sort of positions `0..keys.len()` by `keys`.
///
/// Returns the sorted positions and `num_keys + 1` bucket starts.
pub fn counting_sort(keys: &[u32], num_keys: usize, workers: usize) -> (Vec<u32>, Vec<usize>) {
    let n = keys.len();
    let mut order = vec![0u32; n];
    let starts = scatter_by_digit(
        n,
        num_keys,
        workers,
        |i| keys[i] as usize,
        |dst, pos, i| unsafe { dst.write(pos, i as u32) },
        &mut order,
    );
    (order, starts)
}

/// One stable distribution pass: histogram per chunk, offsets in
/// (digit, chunk) order, then a parallel scatter into disjoint slots.
fn scatter_by_digit<T, D, W>(
    n: usize,
    radix: usize,
    workers: usize,
    digit: D,
    write: W,
    dst: &mut [T],
) -> Vec<usize>
where
    T: Send,
    D: Fn(usize) -> usize + Sync + Send,
    W: Fn(&SharedSlice<'_, T>, usize, usize) + Sync + Send,
{
    let chunks = if workers <= 1 { 1 } else { workers.min(n.max(1)) };
    let ranges = balanced_ranges(n, chunks);
    let hist: Vec<Vec<usize>> = map_tasks(workers, chunks, |c| {
        let mut h = vec![0usize; radix];
        for i in ranges[c].clone() {
            h[digit(i)] += 1;
        }
        h
    });
    let mut offsets = vec![vec![0usize; radix]; chunks];
    let mut starts = Vec::with_capacity(radix + 1);
    let mut acc = 0usize;
    for d in 0..radix {
        starts.push(acc);
        for c in 0..chunks {
            offsets[c][d] = acc;
            acc += hist[c][d];
        }
    }
    starts.push(acc);
    let out = SharedSlice::new(dst);
    let scatter = |(c, mut cursor): (usize, Vec<usize>)| {
        for i in ranges[c].clone() {
            let d = digit(i);
            write(&out, cursor[d], i);
            cursor[d] += 1;
        }
    };
    if chunks == 1 {
        offsets.into_iter().enumerate().for_each(scatter);
    } else {
        offsets.into_par_iter().enumerate().for_each(scatter);
    }
    starts
}

const RADIX_BITS: u32 = 11;

/// Stable LSD radix sort of `(key, item)` pairs by key, `key <= max_key`.
pub fn radix_sort_pairs(pairs: Vec<(u64, u32)>, max_key: u64, workers: usize) -> Vec<(u64, u32)> {
    let bits = 64 - max_key.leading_zeros();
    let passes = bits.div_ceil(RADIX_BITS).max(1);
    let radix = 1usize << RADIX_BITS;
    let mut src = pairs;
    let mut dst = vec![(0u64, 0u32); src.len()];
    for pass in 0..passes {
        let shift = pass * RADIX_BITS;
        {
            let s = &src;
            scatter_by_digit(
                s.len(),
                radix,
                workers,
                |i| ((s[i].0 >> shift) as usize) & (radix - 1),
                |out, pos, i| unsafe { out.write(pos, s[i]) },
                &mut dst,
            );
        }
        std::mem::swap(&mut src, &mut dst);
    }
    src
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn scan_small() {
        assert_eq!(prefix_sums(&[1.0, 2.0, 3.0], 1), vec![1.0, 3.0, 6.0]);
        assert!(prefix_sums(&[], 4).is_empty());
    }

    #[test]
    fn scan_worker_invariant() {
        let mut r = RngStream::new(1, 2);
        let values: Vec<f64> = (0..100_000).map(|_| r.uniform01()).collect();
        let one = prefix_sums(&values, 1);
        let four = prefix_sums(&values, 4);
        assert_eq!(one, four);
        let mut acc = 0.0;
        for (i, &v) in values.iter().enumerate() {
            acc += v;
            assert!((one[i] - acc).abs() <= 1e-9 * acc.max(1.0));
        }
    }

    #[test]
    fn counting_sort_is_stable() {
        let keys = [2u32, 0, 1, 2, 0, 1, 1];
        for workers in [1, 3] {
            let (order, starts) = counting_sort(&keys, 3, workers);
            assert_eq!(order, vec![1, 4, 2, 5, 6, 0, 3]);
            assert_eq!(starts, vec![0, 2, 5, 7]);
        }
    }

    #[test]
    fn radix_matches_std_sort() {
        let mut r = RngStream::new(3, 3);
        let pairs: Vec<(u64, u32)> = (0..50_000)
            .map(|i| (r.below(3_000_000) as u64, i as u32))
            .collect();
        let mut expected = pairs.clone();
        expected.sort_by_key(|p| p.0);
        for workers in [1, 4] {
            assert_eq!(radix_sort_pairs(pairs.clone(), 3_000_000, workers), expected);
        }
    }
}
