//! Compressed rejection structure: one bit per bucket plus a rank directory.
//!
//! Weights are scaled to `ŵ_i = n w_i / W` (so they sum to `n`) and item `i`
//! owns `c_i = ceil(ŵ_i)` consecutive buckets, `m = Σ c_i < 2n` in total. A
//! set bit marks the first bucket of each item. A query picks a bucket,
//! finds its owner by rank, and accepts unless the bucket is the owner's
//! last one, where it accepts with probability `ŵ_i - (c_i - 1)`.

use crate::error::Result;
use crate::par::{balanced_ranges, for_each_task, inclusive_scan, map_tasks};
use crate::rng::RngStream;
use crate::sampler::Sampler;
use crate::weights::WeightTable;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

const WORD_BITS: usize = 64;
const SUPER_BITS: usize = 512;
const WORDS_PER_SUPER: usize = SUPER_BITS / WORD_BITS;

/// Bit vector with a two-level rank directory: absolute counts every 512
/// bits and 16-bit relative counts every 64 bits.
#[derive(Clone, Debug)]
pub struct RankBits {
    words: Vec<u64>,
    len: usize,
    supers: Vec<u64>,
    blocks: Vec<u16>,
}

impl RankBits {
    pub fn from_words(words: Vec<u64>, len: usize, workers: usize) -> RankBits {
        assert!(words.len() * WORD_BITS >= len, "bit length exceeds storage");
        let n_super = words.len().div_ceil(WORDS_PER_SUPER);
        let super_words = |s: usize| {
            let lo = s * WORDS_PER_SUPER;
            &words[lo..(lo + WORDS_PER_SUPER).min(words.len())]
        };
        let totals: Vec<u64> = map_tasks(workers, n_super, |s| {
            super_words(s).iter().map(|w| w.count_ones() as u64).sum()
        });
        let mut supers = Vec::with_capacity(n_super);
        let mut acc = 0u64;
        for t in totals {
            supers.push(acc);
            acc += t;
        }
        let mut blocks = vec![0u16; words.len()];
        let fill = |(s, chunk): (usize, &mut [u16])| {
            let mut c = 0u16;
            for (b, &w) in chunk.iter_mut().zip(super_words(s)) {
                *b = c;
                c += w.count_ones() as u16;
            }
        };
        if workers <= 1 {
            blocks.chunks_mut(WORDS_PER_SUPER).enumerate().for_each(fill);
        } else {
            blocks
                .par_chunks_mut(WORDS_PER_SUPER)
                .enumerate()
                .for_each(fill);
        }
        RankBits {
            words,
            len,
            supers,
            blocks,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1
    }

    /// Number of set bits in `[0, j)`, for `j <= len`.
    #[inline]
    pub fn rank1(&self, j: usize) -> usize {
        debug_assert!(j <= self.len);
        let word = j / WORD_BITS;
        if word == self.words.len() {
            return self.count_ones();
        }
        let mask = (1u64 << (j % WORD_BITS)) - 1;
        self.supers[word / WORDS_PER_SUPER] as usize
            + self.blocks[word] as usize
            + (self.words[word] & mask).count_ones() as usize
    }

    pub fn count_ones(&self) -> usize {
        match self.words.len() {
            0 => 0,
            w => self.rank1((w - 1) * WORD_BITS) + self.words[w - 1].count_ones() as usize,
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

#[derive(Clone, Debug)]
pub struct CompressedTable {
    bits: RankBits,
    /// Acceptance probability of each item's last bucket, in `(0, 1]`.
    residues: Vec<f64>,
    total: f64,
}

impl CompressedTable {
    pub fn build(wt: &WeightTable, workers: usize) -> Result<CompressedTable> {
        let w = wt.weights();
        let n = w.len();
        let scale = n as f64 / wt.total();
        let p = if workers <= 1 { 1 } else { workers.min(n) };
        let ranges = balanced_ranges(n, p);

        let mut counts = vec![0usize; n];
        let mut residues = vec![0.0f64; n];
        let compute = |(c, (cnt, res)): (usize, (&mut [usize], &mut [f64]))| {
            for ((i, ci), ri) in ranges[c].clone().zip(cnt).zip(res) {
                let scaled = w[i] * scale;
                let owned = scaled.ceil().max(1.0);
                *ci = owned as usize;
                *ri = (scaled - (owned - 1.0)).clamp(f64::MIN_POSITIVE, 1.0);
            }
        };
        split_pairs(&mut counts, &mut residues, &ranges, p, compute);

        let ends = inclusive_scan(&counts, workers);
        let m = ends[n - 1];
        let n_words = m.div_ceil(WORD_BITS);
        let atoms: Vec<AtomicU64> = (0..n_words).map(|_| AtomicU64::new(0)).collect();
        for_each_task(workers, p, |c| {
            for i in ranges[c].clone() {
                let start = ends[i] - counts[i];
                atoms[start / WORD_BITS].fetch_or(1 << (start % WORD_BITS), Ordering::Relaxed);
            }
        });
        let words = atoms.into_iter().map(AtomicU64::into_inner).collect();
        Ok(CompressedTable {
            bits: RankBits::from_words(words, m, workers),
            residues,
            total: wt.total(),
        })
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of buckets `m`.
    pub fn bucket_count(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &RankBits {
        &self.bits
    }

    pub fn residue(&self, item: usize) -> f64 {
        self.residues[item]
    }

    #[inline]
    pub fn owner(&self, bucket: usize) -> usize {
        self.bits.rank1(bucket + 1) - 1
    }

    #[inline]
    pub fn is_last_bucket(&self, bucket: usize) -> bool {
        bucket + 1 == self.bits.len() || self.bits.get(bucket + 1)
    }

    /// Draws an item and reports how many rejection rounds it took.
    #[inline]
    pub fn sample_counted(&self, rng: &mut RngStream) -> (usize, u32) {
        let m = self.bits.len();
        let mut rounds = 0;
        loop {
            rounds += 1;
            let j = rng.below(m);
            let u = rng.uniform01();
            let item = self.owner(j);
            if !self.is_last_bucket(j) || u < self.residues[item] {
                return (item, rounds);
            }
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        self.sample_counted(rng).0
    }
}

impl Sampler for CompressedTable {
    fn draw(&self, rng: &mut RngStream) -> usize {
        self.sample(rng)
    }
}

fn split_pairs<A: Send, B: Send, F>(
    a: &mut [A],
    b: &mut [B],
    ranges: &[std::ops::Range<usize>],
    p: usize,
    f: F,
) where
    F: Fn((usize, (&mut [A], &mut [B]))) + Sync + Send,
{
    let mut parts = Vec::with_capacity(p);
    let (mut ra, mut rb) = (a, b);
    for r in ranges {
        let (ha, ta) = ra.split_at_mut(r.len());
        let (hb, tb) = rb.split_at_mut(r.len());
        parts.push((ha, hb));
        ra = ta;
        rb = tb;
    }
    if p <= 1 {
        parts.into_iter().enumerate().for_each(f);
    } else {
        parts.into_par_iter().enumerate().for_each(f);
    }
}
