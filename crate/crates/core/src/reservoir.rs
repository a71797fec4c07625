//! Mini-batch weighted reservoir sampling over simulated processing
//! elements (PEs).
//!
//! Every streamed item conceptually gets the key `Exp(w)`, and the reservoir
//! holds the `k` smallest keys seen so far; `T` is the largest of them. An
//! item can only enter if its key is below `T`, which happens with
//! probability `1 - exp(-T w)`. Each PE therefore skips over an
//! exponentially distributed amount of `T`-scaled weight, gives the item it
//! lands on a key drawn from `Exp(w)` truncated to `[0, T)`, and inserts it
//! locally. After each batch the PEs agree on the new `T` by selecting the
//! `k`-th smallest key over all local reservoirs and drop everything above.

use crate::error::{Error, Result};
use crate::rng::{exponential_key, RngStream};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Reservoir key ordered by value, then item id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResKey {
    pub key: f64,
    pub item: usize,
}

impl Eq for ResKey {}

impl Ord for ResKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.item.cmp(&other.item))
    }
}

impl PartialOrd for ResKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Key distributed as `Exp(w)` conditioned on being below `t`.
pub fn insertion_key(w: f64, t: f64, rng: &mut RngStream) -> f64 {
    assert!(w > 0.0 && t > 0.0 && t.is_finite());
    // Probability mass of [0, t) under Exp(w).
    let mass = -(-t * w).exp_m1();
    loop {
        let v = -(-rng.uniform_open() * mass).ln_1p() / w;
        if v < t {
            return v;
        }
    }
}

/// One PE's share of the reservoir, ordered by key.
#[derive(Clone, Debug, Default)]
pub struct LocalReservoir {
    entries: BTreeMap<ResKey, f64>,
}

impl LocalReservoir {
    pub fn insert(&mut self, key: f64, item: usize, weight: f64) {
        self.entries.insert(ResKey { key, item }, weight);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_key(&self) -> Option<ResKey> {
        self.entries.keys().next_back().copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &ResKey> {
        self.entries.keys()
    }

    /// Drops every entry ordered after `bound`.
    fn split_above(&mut self, bound: ResKey) {
        let mut above = self.entries.split_off(&bound);
        if let Some(w) = above.remove(&bound) {
            self.entries.insert(bound, w);
        }
    }
}

/// Keeps the `k` smallest keys across all local reservoirs and returns the
/// largest kept key, or `+∞` (trimming nothing) if there are fewer than `k`.
pub fn threshold_select(locals: &mut [LocalReservoir], k: usize) -> f64 {
    let total: usize = locals.iter().map(LocalReservoir::len).sum();
    if total < k || k == 0 {
        return f64::INFINITY;
    }
    let mut all: Vec<ResKey> = Vec::with_capacity(total);
    for l in locals.iter() {
        all.extend(l.keys().copied());
    }
    let (_, &mut kth, _) = all.select_nth_unstable(k - 1);
    for l in locals.iter_mut() {
        if l.max_key().is_some_and(|m| m > kth) {
            l.split_above(kth);
        }
    }
    kth.key
}

/// Items handed to each PE for one round: `per_pe[p]` lists `(item, weight)`.
#[derive(Clone, Debug, Default)]
pub struct MiniBatch {
    pub per_pe: Vec<Vec<(usize, f64)>>,
}

impl MiniBatch {
    pub fn new(per_pe: Vec<Vec<(usize, f64)>>) -> Result<MiniBatch> {
        for part in &per_pe {
            for &(index, value) in part {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidWeight { index, value });
                }
            }
        }
        Ok(MiniBatch { per_pe })
    }

    /// Cuts a weight sequence into rounds of `pes * per_pe` consecutive items,
    /// dealing item `t` of each round to PE `t mod pes`.
    pub fn round_robin(weights: &[f64], pes: usize, per_pe: usize) -> Vec<MiniBatch> {
        let pes = pes.max(1);
        let round = pes * per_pe.max(1);
        weights
            .chunks(round)
            .enumerate()
            .map(|(r, chunk)| {
                let mut parts = vec![Vec::with_capacity(per_pe); pes];
                for (t, &w) in chunk.iter().enumerate() {
                    parts[t % pes].push((r * round + t, w));
                }
                MiniBatch { per_pe: parts }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.per_pe.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
struct Pe {
    local: LocalReservoir,
    rng: RngStream,
    /// Remaining skip in units of `T`-scaled weight (a standard exponential).
    skip: Option<f64>,
    insertions: u64,
}

impl Pe {
    fn process(&mut self, items: &[(usize, f64)], t: f64) {
        if t.is_infinite() {
            for &(item, w) in items {
                let key = exponential_key(w, &mut self.rng);
                self.local.insert(key, item, w);
                self.insertions += 1;
            }
            return;
        }
        for &(item, w) in items {
            let cost = t * w;
            let skip = match self.skip {
                Some(s) => s,
                None => exponential_key(1.0, &mut self.rng),
            };
            if skip > cost {
                self.skip = Some(skip - cost);
                continue;
            }
            let key = insertion_key(w, t, &mut self.rng);
            self.local.insert(key, item, w);
            self.insertions += 1;
            self.skip = None;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReservoirSampler {
    k: usize,
    threshold: f64,
    seen: u64,
    pes: Vec<Pe>,
}

impl ReservoirSampler {
    /// `k`-item reservoir spread over `pes` PEs; PE `p` uses stream `(seed, p)`.
    pub fn new(k: usize, pes: usize, seed: u64) -> Result<ReservoirSampler> {
        if k == 0 || pes == 0 {
            return Err(Error::InvalidArgument(
                "reservoir needs k >= 1 and at least one PE".into(),
            ));
        }
        let pes = (0..pes)
            .map(|p| Pe {
                local: LocalReservoir::default(),
                rng: RngStream::new(seed, p as u64),
                skip: None,
                insertions: 0,
            })
            .collect();
        Ok(ReservoirSampler {
            k,
            threshold: f64::INFINITY,
            seen: 0,
            pes,
        })
    }

    /// Runs one round: every PE scans its part with `T` held fixed, then the
    /// global threshold is recomputed.
    pub fn process_batch(&mut self, batch: &MiniBatch, workers: usize) -> Result<()> {
        if batch.per_pe.len() != self.pes.len() {
            return Err(Error::InvalidArgument(format!(
                "batch has {} parts for {} PEs",
                batch.per_pe.len(),
                self.pes.len()
            )));
        }
        let t = self.threshold;
        if workers <= 1 {
            for (pe, items) in self.pes.iter_mut().zip(&batch.per_pe) {
                pe.process(items, t);
            }
        } else {
            self.pes
                .par_iter_mut()
                .zip(&batch.per_pe)
                .for_each(|(pe, items)| pe.process(items, t));
        }
        self.seen += batch.len() as u64;
        let mut locals: Vec<LocalReservoir> =
            self.pes.iter_mut().map(|p| std::mem::take(&mut p.local)).collect();
        let new_t = threshold_select(&mut locals, self.k);
        for (pe, l) in self.pes.iter_mut().zip(locals) {
            pe.local = l;
        }
        self.threshold = new_t;
        Ok(())
    }

    /// Current threshold `T`; `+∞` until `k` items have been seen.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.pes.iter().map(|p| p.local.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locals(&self) -> Vec<&LocalReservoir> {
        self.pes.iter().map(|p| &p.local).collect()
    }

    /// Local insertions per PE so far.
    pub fn insertions(&self) -> Vec<u64> {
        self.pes.iter().map(|p| p.insertions).collect()
    }

    /// Items in the reservoir, smallest key first.
    pub fn sample(&self) -> Vec<usize> {
        let mut all: Vec<ResKey> = self
            .pes
            .iter()
            .flat_map(|p| p.local.keys().copied())
            .collect();
        all.sort_unstable();
        all.into_iter().map(|k| k.item).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(weights: &[f64], k: usize, pes: usize, b: usize, seed: u64) -> ReservoirSampler {
        let mut r = ReservoirSampler::new(k, pes, seed).unwrap();
        for batch in MiniBatch::round_robin(weights, pes, b) {
            r.process_batch(&batch, 1).unwrap();
            let keys: Vec<f64> = r.locals().iter().flat_map(|l| l.keys().map(|k| k.key)).collect();
            assert_eq!(keys.len() as u64, (k as u64).min(r.seen()));
            if r.seen() >= k as u64 {
                let max = keys.iter().copied().fold(0.0, f64::max);
                assert_eq!(max, r.threshold());
            }
        }
        r
    }

    #[test]
    fn fewer_than_k_keeps_everything() {
        let r = run(&[1.0, 2.0, 3.0], 5, 2, 1, 1);
        let mut s = r.sample();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2]);
        assert!(r.threshold().is_infinite());
    }

    #[test]
    fn invariants_on_a_long_stream() {
        let mut g = RngStream::new(2, 2);
        let w: Vec<f64> = (0..5000).map(|_| g.uniform_open()).collect();
        for (pes, b) in [(1, 1), (3, 7), (4, 50)] {
            let r = run(&w, 40, pes, b, 3);
            assert_eq!(r.len(), 40);
        }
    }

    #[test]
    fn keys_stay_below_threshold() {
        let mut r = RngStream::new(4, 4);
        for &(w, t) in &[(1.0, 1.0), (1e-9, 3.0), (50.0, 0.01), (1e6, 1e-8)] {
            for _ in 0..10_000 {
                let v = insertion_key(w, t, &mut r);
                assert!((0.0..t).contains(&v));
            }
        }
    }

    #[test]
    fn truncated_exponential_ks() {
        let mut r = RngStream::new(5, 5);
        let n = 100_000;
        let mut v: Vec<f64> = (0..n).map(|_| insertion_key(1.0, 1.0, &mut r)).collect();
        v.sort_unstable_by(f64::total_cmp);
        let mass = 1.0 - (-1f64).exp();
        let mut d = 0.0f64;
        for (i, &x) in v.iter().enumerate() {
            let f = (1.0 - (-x).exp()) / mass;
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        // Asymptotic critical value at alpha = 0.001.
        assert!(d < 1.9495 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn select_matches_full_sort() {
        let mut r = RngStream::new(6, 6);
        let mut locals = vec![LocalReservoir::default(); 4];
        let mut all = Vec::new();
        for i in 0..1000 {
            let key = r.uniform01();
            let p = r.below(4);
            locals[p].insert(key, i, 1.0);
            all.push(ResKey { key, item: i });
        }
        all.sort_unstable();
        let t = threshold_select(&mut locals, 137);
        assert_eq!(t, all[136].key);
        let mut kept: Vec<ResKey> = locals.iter().flat_map(|l| l.keys().copied()).collect();
        kept.sort_unstable();
        assert_eq!(kept, all[..137]);

        let mut one = vec![LocalReservoir::default()];
        for (i, k) in [3.0, 1.0, 2.0].iter().enumerate() {
            one[0].insert(*k, i, 1.0);
        }
        assert_eq!(threshold_select(&mut one, 1), 1.0);
        assert_eq!(one[0].len(), 1);
        assert!(threshold_select(&mut one, 2).is_infinite());
    }

    #[test]
    fn rejects_mismatched_batches() {
        let mut r = ReservoirSampler::new(2, 3, 0).unwrap();
        let b = MiniBatch::new(vec![vec![(0, 1.0)]]).unwrap();
        assert!(r.process_batch(&b, 1).is_err());
        assert!(MiniBatch::new(vec![vec![(0, -1.0)]]).is_err());
    }
}
