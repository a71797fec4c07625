//! Weighted random permutation by integer sorting of transformed keys.
//!
//! Item `i` gets the exponential key `e_i = -ln(r_i) / w_i`; sorting by `e`
//! yields the permutation. Since `f(e) = n ln(e n w_max)` is increasing, the
//! integer `floor(f)` can be counting- or radix-sorted first, and only items
//! sharing a slot need comparing. Keys below 0 or at least
//! `K = ceil(n ln(n U ln n))` are clamped into two extra slots.

use crate::par::radix_sort_pairs;
use crate::rng::RngStream;
use crate::weights::WeightTable;
use rayon::prelude::*;

/// Items per key-generation block; block `b` draws from child stream `b`.
const KEY_BLOCK: usize = 4096;

/// Number of regular slots `K` for `n` items with weight ratio `U`.
pub fn slot_count(n: usize, ratio: f64) -> u64 {
    if n < 2 {
        return 1;
    }
    let nf = n as f64;
    (nf * (nf * ratio * nf.ln()).ln()).ceil().max(1.0) as u64
}

/// Integer slot of key `e`: 0 below range, `K + 1` above, else `floor(f) + 1`.
#[inline]
pub fn slot_of(e: f64, n: usize, w_max: f64, k: u64) -> u64 {
    let f = n as f64 * (e.ln() + (n as f64 * w_max).ln());
    if f < 0.0 {
        0
    } else if f >= k as f64 {
        k + 1
    } else {
        f as u64 + 1
    }
}

/// Whether `K` slots are too many to sort by; the bound keeps the counters
/// linear in `n` for extreme weight ratios.
fn too_many_slots(n: usize, k: u64) -> bool {
    let nf = n as f64;
    k as f64 > 8.0 * nf * nf.ln() + 64.0
}

/// Exact exponential keys of all items, drawn blockwise from children of
/// `base` so the values do not depend on the worker count.
pub fn exponential_keys(wt: &WeightTable, base: &RngStream, workers: usize) -> Vec<f64> {
    let w = wt.weights();
    let mut keys = vec![0.0; w.len()];
    let fill = |(b, chunk): (usize, &mut [f64])| {
        let mut r = base.child(b as u64);
        let lo = b * KEY_BLOCK;
        for (e, &wi) in chunk.iter_mut().zip(&w[lo..]) {
            *e = -r.uniform_open().ln() / wi;
        }
    };
    if workers <= 1 {
        keys.chunks_mut(KEY_BLOCK).enumerate().for_each(fill);
    } else {
        keys.par_chunks_mut(KEY_BLOCK).enumerate().for_each(fill);
    }
    keys
}

fn by_key(keys: &[f64]) -> impl Fn(&u32, &u32) -> std::cmp::Ordering + '_ {
    move |&a, &b| keys[a as usize].total_cmp(&keys[b as usize]).then(a.cmp(&b))
}

/// A permutation of `0..n` distributed as drawing items one by one with
/// probability proportional to weight among those left.
pub fn weighted_permutation(wt: &WeightTable, rng: &mut RngStream, workers: usize) -> Vec<usize> {
    let n = wt.len();
    if n == 1 {
        return vec![0];
    }
    let base = rng.fork();
    let keys = exponential_keys(wt, &base, workers);
    let order = permutation_from_keys(wt, &keys, workers).0;
    if cfg!(debug_assertions) {
        let mut seen = vec![false; n];
        for &i in &order {
            assert!(!std::mem::replace(&mut seen[i], true), "item {i} repeated");
        }
    }
    order
}

/// Slot sizes observed while sorting: empty when the comparison-sort
/// fallback was used.
pub type SlotHistogram = Vec<(u64, usize)>;

/// Sorts items by key through the slot transform. Also returns the sizes of
/// the nonempty slots in slot order.
pub fn permutation_from_keys(
    wt: &WeightTable,
    keys: &[f64],
    workers: usize,
) -> (Vec<usize>, SlotHistogram) {
    let n = wt.len();
    let k = slot_count(n, wt.ratio());
    let cmp = by_key(keys);
    if too_many_slots(n, k) {
        let mut items: Vec<u32> = (0..n as u32).collect();
        if workers <= 1 {
            items.sort_unstable_by(&cmp);
        } else {
            items.par_sort_unstable_by(&cmp);
        }
        return (items.into_iter().map(|i| i as usize).collect(), Vec::new());
    }
    let w_max = wt.max();
    let pairs: Vec<(u64, u32)> = if workers <= 1 {
        keys.iter()
            .enumerate()
            .map(|(i, &e)| (slot_of(e, n, w_max, k), i as u32))
            .collect()
    } else {
        keys.par_iter()
            .enumerate()
            .map(|(i, &e)| (slot_of(e, n, w_max, k), i as u32))
            .collect()
    };
    let sorted = radix_sort_pairs(pairs, k + 1, workers);
    let mut hist: SlotHistogram = Vec::new();
    for p in &sorted {
        match hist.last_mut() {
            Some((s, c)) if *s == p.0 => *c += 1,
            _ => hist.push((p.0, 1)),
        }
    }
    let mut items: Vec<u32> = sorted.iter().map(|p| p.1).collect();
    let mut runs = Vec::with_capacity(hist.len());
    let mut rest = items.as_mut_slice();
    for &(_, c) in &hist {
        let (head, tail) = rest.split_at_mut(c);
        runs.push(head);
        rest = tail;
    }
    let sort_run = |run: &mut [u32]| {
        if run.len() > 1 {
            run.sort_unstable_by(&cmp);
        }
    };
    if workers <= 1 {
        runs.into_iter().for_each(sort_run);
    } else {
        runs.into_par_iter().for_each(sort_run);
    }
    (items.into_iter().map(|i| i as usize).collect(), hist)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OccupancyStats {
    /// Average over items of the number of other items in the same slot.
    pub mean_occupancy: f64,
    /// Average over trials of the largest slot size.
    pub mean_max_slot: f64,
    /// Average number of items clamped to the two outer slots.
    pub mean_clamped: f64,
    /// Average number of nonempty slots.
    pub mean_nonempty: f64,
    pub trials: usize,
}

/// Measures how crowded the slots get over `trials` random permutations.
pub fn bucket_occupancy_audit(wt: &WeightTable, trials: usize, seed: u64) -> OccupancyStats {
    let n = wt.len();
    let k = slot_count(n, wt.ratio());
    let base = RngStream::new(seed, 0);
    let mut occ = 0.0;
    let mut max = 0.0;
    let mut clamped = 0.0;
    let mut nonempty = 0.0;
    for t in 0..trials {
        let keys = exponential_keys(wt, &base.child(t as u64), 1);
        let hist = if n == 1 {
            vec![(slot_of(keys[0], n, wt.max(), k), 1)]
        } else {
            permutation_from_keys(wt, &keys, 1).1
        };
        let pairs: usize = hist.iter().map(|&(_, c)| c * (c - 1)).sum();
        occ += pairs as f64 / n as f64;
        max += hist.iter().map(|&(_, c)| c).max().unwrap_or(0) as f64;
        clamped += hist
            .iter()
            .filter(|&&(s, _)| s == 0 || s == k + 1)
            .map(|&(_, c)| c)
            .sum::<usize>() as f64;
        nonempty += hist.len() as f64;
    }
    let t = trials.max(1) as f64;
    OccupancyStats {
        mean_occupancy: occ / t,
        mean_max_slot: max / t,
        mean_clamped: clamped / t,
        mean_nonempty: nonempty / t,
        trials,
    }
}
