//! Independent subset sampling: item `i` is included with probability
//! `w_i <= 1`, in expected time `O(1 + Σ w_i)`.
//!
//! Items are counting-sorted into magnitude classes `B_c` holding
//! `2^-(c+1) < w <= 2^-c`, with everything at most `2^-L`, `L = ceil(log2 n)`,
//! lumped into `B_L`. Inside a class with largest probability `w̄`, geometric
//! skips find the items whose coin at rate `w̄` comes up, and each of those is
//! kept with probability `w / w̄`.

use crate::error::{Error, Result};
use crate::par::{counting_sort, map_tasks, prefix_sums};
use crate::rng::RngStream;
use crate::weights::WeightTable;
use rayon::prelude::*;

/// Magnitude class of probability `w` among `levels + 1` classes.
pub fn magnitude_class(w: f64, levels: u32) -> u32 {
    debug_assert!(w > 0.0 && w <= 1.0);
    let mut c = (-w.log2()).floor().max(0.0) as i32;
    while c > 0 && w > 2f64.powi(-c) {
        c -= 1;
    }
    while w <= 2f64.powi(-(c + 1)) {
        c += 1;
    }
    (c as u32).min(levels)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnitudeBucket {
    pub class: u32,
    /// Range of positions in [`SubsetSampler::order`].
    pub start: usize,
    pub end: usize,
    /// Largest probability in the bucket.
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct SubsetSampler {
    levels: u32,
    order: Vec<u32>,
    probs: Vec<f64>,
    prefix: Vec<f64>,
    buckets: Vec<MagnitudeBucket>,
    /// `ranges[p]` is the block of sorted positions worker `p` scans.
    ranges: Vec<std::ops::Range<usize>>,
}

impl SubsetSampler {
    /// Builds the sampler for up to `workers` query workers. Rejects any
    /// probability above one.
    pub fn build(wt: &WeightTable, workers: usize) -> Result<SubsetSampler> {
        let w = wt.weights();
        let n = w.len();
        if let Some(index) = w.iter().position(|&x| x > 1.0) {
            return Err(Error::ProbabilityAboveOne {
                index,
                value: w[index],
            });
        }
        let levels = (n as f64).log2().ceil() as u32;
        let keys: Vec<u32> = if workers <= 1 {
            w.iter().map(|&x| magnitude_class(x, levels)).collect()
        } else {
            w.par_iter().map(|&x| magnitude_class(x, levels)).collect()
        };
        let (order, starts) = counting_sort(&keys, levels as usize + 1, workers);
        let probs: Vec<f64> = order.iter().map(|&i| w[i as usize]).collect();
        let prefix = prefix_sums(&probs, workers);

        let buckets: Vec<MagnitudeBucket> = map_tasks(workers, levels as usize + 1, |c| {
            let (start, end) = (starts[c], starts[c + 1]);
            let max = probs[start..end].iter().copied().fold(0.0, f64::max);
            MagnitudeBucket {
                class: c as u32,
                start,
                end,
                max,
            }
        })
        .into_iter()
        .filter(|b| b.end > b.start)
        .collect();

        // Worker p starts at the first item whose exclusive prefix reaches
        // p W / workers.
        let parts = workers.max(1);
        let total = prefix[n - 1];
        let mut cuts = vec![0usize; parts + 1];
        cuts[parts] = n;
        for (p, cut) in cuts.iter_mut().enumerate().take(parts).skip(1) {
            let x = total * p as f64 / parts as f64;
            *cut = (1 + prefix[..n - 1].partition_point(|&s| s < x)).min(n);
        }
        let ranges = cuts.windows(2).map(|c| c[0]..c[1]).collect();

        Ok(SubsetSampler {
            levels,
            order,
            probs,
            prefix,
            buckets,
            ranges,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `L`: the last class index.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Item ids sorted by magnitude class.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Inclusive prefix sums of the probabilities in sorted order.
    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    /// Nonempty magnitude buckets in class order.
    pub fn buckets(&self) -> &[MagnitudeBucket] {
        &self.buckets
    }

    pub fn worker_ranges(&self) -> &[std::ops::Range<usize>] {
        &self.ranges
    }

    /// Draws one subset. Worker `p` scans its block of sorted positions with
    /// stream `p` of a key taken from `rng`; the blocks were fixed at build
    /// time and are processed in parallel when `workers > 1`.
    pub fn sample(&self, rng: &mut RngStream, workers: usize) -> Vec<usize> {
        let base = rng.fork();
        let parts: Vec<Vec<usize>> = map_tasks(workers, self.ranges.len(), |p| {
            let mut r = base.child(p as u64);
            let mut out = Vec::new();
            let range = &self.ranges[p];
            for b in &self.buckets {
                let lo = b.start.max(range.start);
                let hi = b.end.min(range.end);
                if lo < hi {
                    self.scan(lo, hi, b.max, &mut r, &mut out);
                }
            }
            out
        });
        let offsets: Vec<usize> = parts
            .iter()
            .scan(0, |acc, v| {
                let o = *acc;
                *acc += v.len();
                Some(o)
            })
            .collect();
        let len = offsets.last().copied().unwrap_or(0) + parts.last().map_or(0, Vec::len);
        let mut out = vec![0usize; len];
        let mut slices = Vec::with_capacity(parts.len());
        let mut rest = out.as_mut_slice();
        for v in &parts {
            let (head, tail) = rest.split_at_mut(v.len());
            slices.push(head);
            rest = tail;
        }
        let copy = |(dst, src): (&mut [usize], &Vec<usize>)| dst.copy_from_slice(src);
        if workers <= 1 {
            slices.into_iter().zip(&parts).for_each(copy);
        } else {
            slices.into_par_iter().zip(&parts).for_each(copy);
        }
        out
    }

    /// Geometric skipping over sorted positions `lo..hi` at rate `max`.
    fn scan(&self, lo: usize, hi: usize, max: f64, r: &mut RngStream, out: &mut Vec<usize>) {
        if max >= 1.0 {
            for j in lo..hi {
                if r.uniform01() < self.probs[j] {
                    out.push(self.order[j] as usize);
                }
            }
            return;
        }
        let log_miss = (-max).ln_1p();
        let mut j = lo;
        loop {
            let skip = (r.uniform_open().ln() / log_miss).floor();
            if skip >= (hi - j) as f64 {
                return;
            }
            j += skip as usize;
            if r.uniform01() * max < self.probs[j] {
                out.push(self.order[j] as usize);
            }
            j += 1;
        }
    }
}
