//! Alias tables for drawing one item with probability `w_i / W` in constant
//! time.
//!
//! Three constructions share one output layout:
//!
//! * [`AliasTable::build_vose`]: the classic light/heavy stack method.
//! * [`AliasTable::build_sweep`]: two indices sweep the input for the next
//!   light and next heavy item; no auxiliary arrays.
//! * [`AliasTable::build_psa`]: splits the light and heavy index arrays into
//!   `p` independent subproblems of about `n / p` buckets each and packs them
//!   in parallel. A heavy item whose weight straddles a split boundary is
//!   used as an alias on both sides, and only the last subproblem that uses
//!   it fills its own bucket.
//!
//! Ties `w_i == W/n` are classified as light by every builder.

use crate::compensated::Compensated;
use crate::error::{Error, Result};
use crate::par::{balanced_ranges, inclusive_scan, map_tasks, SharedSlice};
use crate::rng::RngStream;
use crate::sampler::Sampler;
use crate::weights::WeightTable;
use std::sync::atomic::{AtomicU32, Ordering};

/// One bucket: `share` of capacity `W/n` belongs to `items[0]`, the rest to
/// `items[1]` (the alias).
///
/// Stored as a single 16-byte record so a query touches one cache line.
#[derive(Clone, Copy, Debug, PartialEq)]
#[repr(C, align(16))]
pub struct AliasBucket {
    pub share: f64,
    pub items: [u32; 2],
}

impl AliasBucket {
    fn new(share: f64, item: usize, alias: usize) -> Self {
        AliasBucket {
            share,
            items: [item as u32, alias as u32],
        }
    }

    pub fn item(&self) -> usize {
        self.items[0] as usize
    }

    pub fn alias(&self) -> usize {
        self.items[1] as usize
    }
}

/// Which construction algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AliasMethod {
    Vose,
    Sweep,
    Psa { workers: usize },
}

#[derive(Clone, Debug)]
pub struct AliasTable {
    buckets: Vec<AliasBucket>,
    total: f64,
    bucket_weight: f64,
}

impl AliasTable {
    pub fn build(wt: &WeightTable, method: AliasMethod) -> AliasTable {
        match method {
            AliasMethod::Vose => Self::build_vose(wt),
            AliasMethod::Sweep => Self::build_sweep(wt),
            AliasMethod::Psa { workers } => Self::build_psa(wt, workers),
        }
    }

    /// Assembles a table from raw buckets, checking indices and shares.
    pub fn from_parts(buckets: Vec<AliasBucket>, total: f64) -> Result<AliasTable> {
        if buckets.is_empty() {
            return Err(Error::Empty);
        }
        let n = buckets.len();
        let bucket_weight = total / n as f64;
        for (i, b) in buckets.iter().enumerate() {
            if b.item() >= n || b.alias() >= n {
                return Err(Error::InvalidArgument(format!(
                    "bucket {i} references an item outside 0..{n}"
                )));
            }
            if !(b.share >= 0.0 && b.share.is_finite()) {
                return Err(Error::InvalidWeight {
                    index: i,
                    value: b.share,
                });
            }
        }
        Ok(AliasTable {
            buckets,
            total,
            bucket_weight,
        })
    }

    fn finish(wt: &WeightTable, buckets: Vec<AliasBucket>) -> AliasTable {
        AliasTable {
            buckets,
            total: wt.total(),
            bucket_weight: wt.bucket_weight(),
        }
    }

    pub fn build_vose(wt: &WeightTable) -> AliasTable {
        let w = wt.weights();
        let bw = wt.bucket_weight();
        let mut b: Vec<AliasBucket> = w
            .iter()
            .enumerate()
            .map(|(i, &wi)| AliasBucket::new(wi, i, i))
            .collect();
        let mut heavy: Vec<u32> = Vec::new();
        let mut light: Vec<u32> = Vec::new();
        for (i, &wi) in w.iter().enumerate() {
            if wi > bw {
                heavy.push(i as u32);
            } else {
                light.push(i as u32);
            }
        }
        while let Some(j) = heavy.pop() {
            let j = j as usize;
            let mut residual = Compensated::new(w[j]);
            while residual.value() > bw {
                let Some(i) = light.pop() else { break };
                let i = i as usize;
                b[i].items[1] = j as u32;
                residual = residual + b[i].share - bw;
            }
            b[j].share = residual.value().clamp(0.0, bw);
            light.push(j as u32);
        }
        Self::finish(wt, b)
    }

    pub fn build_sweep(wt: &WeightTable) -> AliasTable {
        let w = wt.weights();
        let n = w.len();
        let bw = wt.bucket_weight();
        let next_light = |from: usize| (from..n).find(|&k| w[k] <= bw).unwrap_or(n);
        let next_heavy = |from: usize| (from..n).find(|&k| w[k] > bw).unwrap_or(n);

        let mut b = vec![AliasBucket::new(0.0, 0, 0); n];
        let mut i = next_light(0);
        let mut j = next_heavy(0);
        // Residual weight of heavy item j; the sentinel past the last heavy
        // item is infinitely heavy.
        let mut residual = if j < n {
            Compensated::new(w[j])
        } else {
            Compensated::INFINITY
        };
        loop {
            let can_heavy = j < n;
            let can_light = i < n;
            if !can_heavy && !can_light {
                break;
            }
            if can_heavy && (residual.value() <= bw || !can_light) {
                let next = next_heavy(j + 1);
                let alias = if next < n { next } else { j };
                let share = residual.value().clamp(0.0, bw);
                b[j] = AliasBucket::new(share, j, alias);
                residual = if next < n {
                    Compensated::new(w[next]) + share - bw
                } else {
                    Compensated::INFINITY
                };
                j = next;
            } else {
                let alias = if j < n { j } else { i };
                b[i] = AliasBucket::new(w[i], i, alias);
                if j < n {
                    residual = residual + w[i] - bw;
                }
                i = next_light(i + 1);
            }
        }
        Self::finish(wt, b)
    }

    pub fn build_psa(wt: &WeightTable, workers: usize) -> AliasTable {
        if cfg!(debug_assertions) {
            let (table, fills) = Self::build_psa_counted(wt, workers);
            debug_assert!(
                fills.iter().all(|&c| c == 1),
                "every bucket must be written exactly once"
            );
            table
        } else {
            psa(wt, workers, None)
        }
    }

    /// PSA construction that also reports how often each bucket was written.
    pub fn build_psa_counted(wt: &WeightTable, workers: usize) -> (AliasTable, Vec<u32>) {
        let counts: Vec<AtomicU32> = (0..wt.len()).map(|_| AtomicU32::new(0)).collect();
        let table = psa(wt, workers, Some(&counts));
        (table, counts.into_iter().map(AtomicU32::into_inner).collect())
    }

    pub fn buckets(&self) -> &[AliasBucket] {
        &self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn bucket_weight(&self) -> f64 {
        self.bucket_weight
    }

    /// Draws one item: a uniform bucket, then a branchless pick between the
    /// bucket's owner and its alias.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let b = &self.buckets[rng.below(self.buckets.len())];
        let x = rng.uniform01() * self.bucket_weight;
        b.items[(x >= b.share) as usize] as usize
    }
}

impl Sampler for AliasTable {
    fn draw(&self, rng: &mut RngStream) -> usize {
        self.sample(rng)
    }
}

/// Result of splitting the first `n'` buckets off: `lights` light items and
/// `heavies` heavy items go left, and `spill` weight of the next heavy item
/// is left over for the right side.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Split {
    lights: usize,
    heavies: usize,
    spill: f64,
}

struct PsaInput<'a> {
    w: &'a [f64],
    bw: f64,
    light: Vec<u32>,
    heavy: Vec<u32>,
    light_prefix: Vec<Compensated>,
    heavy_prefix: Vec<Compensated>,
}

impl PsaInput<'_> {
    fn light_sum(&self, x: usize) -> Compensated {
        if x == 0 {
            Compensated::default()
        } else {
            self.light_prefix[x - 1]
        }
    }

    fn heavy_sum(&self, x: usize) -> Compensated {
        if x == 0 {
            Compensated::default()
        } else {
            self.heavy_prefix[x - 1]
        }
    }

    /// Binary search for the largest heavy count `j` (with `i = n' - j`
    /// lights) whose combined weight does not exceed `n' W/n`.
    fn split(&self, n_left: usize) -> Split {
        let nl = self.light.len();
        let nh = self.heavy.len();
        let target = Compensated::product(n_left as f64, self.bw);
        let sigma = |j: usize| self.light_sum(n_left - j) + self.heavy_sum(j);
        let mut lo = n_left.saturating_sub(nl);
        let mut hi = n_left.min(nh);
        let mut best = lo;
        while lo <= hi {
            let mid = lo + (hi - lo) / 2;
            if sigma(mid).cmp_to(target).is_le() {
                best = mid;
                lo = mid + 1;
            } else if mid == 0 {
                break;
            } else {
                hi = mid - 1;
            }
        }
        let spill = if best < nh {
            (sigma(best) + self.w[self.heavy[best] as usize] - target)
                .value()
                .max(0.0)
        } else {
            0.0
        };
        Split {
            lights: n_left - best,
            heavies: best,
            spill,
        }
    }
}

fn psa(wt: &WeightTable, workers: usize, counts: Option<&[AtomicU32]>) -> AliasTable {
    let w = wt.weights();
    let n = w.len();
    let bw = wt.bucket_weight();
    let p = workers.clamp(1, n);

    let ranges = balanced_ranges(n, p);
    let parts: Vec<(Vec<u32>, Vec<u32>)> = map_tasks(workers, p, |c| {
        let mut l = Vec::new();
        let mut h = Vec::new();
        for i in ranges[c].clone() {
            if w[i] > bw {
                h.push(i as u32);
            } else {
                l.push(i as u32);
            }
        }
        (l, h)
    });
    let mut light = Vec::with_capacity(n);
    let mut heavy = Vec::new();
    for (l, h) in parts {
        light.extend(l);
        heavy.extend(h);
    }
    let lw: Vec<Compensated> = light.iter().map(|&i| Compensated::new(w[i as usize])).collect();
    let hw: Vec<Compensated> = heavy.iter().map(|&i| Compensated::new(w[i as usize])).collect();
    let input = PsaInput {
        w,
        bw,
        light_prefix: inclusive_scan(&lw, workers),
        heavy_prefix: inclusive_scan(&hw, workers),
        light,
        heavy,
    };

    let mut bounds = vec![Split {
        lights: 0,
        heavies: 0,
        spill: 0.0,
    }];
    bounds.extend(map_tasks(workers, p - 1, |k| {
        input.split((n * (k + 1)).div_ceil(p))
    }));
    bounds.push(Split {
        lights: input.light.len(),
        heavies: input.heavy.len(),
        spill: 0.0,
    });

    let mut buckets = vec![AliasBucket::new(0.0, 0, 0); n];
    {
        let out = SharedSlice::new(&mut buckets);
        let input = &input;
        let bounds = &bounds;
        let pack_k = |k: usize| {
            let carried = (k > 0).then_some(bounds[k].spill);
            pack(
                input,
                bounds[k].lights..bounds[k + 1].lights,
                bounds[k].heavies..bounds[k + 1].heavies,
                carried,
                &out,
                counts,
            )
        };
        crate::par::for_each_task(workers, p, pack_k);
    }
    AliasTable::finish(wt, buckets)
}

/// Fills the buckets of `light[lights]` and `heavy[heavies]`. `carried` is
/// the part of `heavy[heavies.start]` not consumed by earlier subproblems;
/// `None` for the first subproblem.
fn pack(
    input: &PsaInput<'_>,
    lights: std::ops::Range<usize>,
    heavies: std::ops::Range<usize>,
    carried: Option<f64>,
    out: &SharedSlice<'_, AliasBucket>,
    counts: Option<&[AtomicU32]>,
) {
    let w = input.w;
    let bw = input.bw;
    let nh = input.heavy.len();
    let heavy = &input.heavy;
    let light = &input.light;
    let put = |idx: usize, bucket: AliasBucket| {
        // SAFETY: subproblems own disjoint light and heavy index ranges and
        // each index names one bucket.
        unsafe { out.write(idx, bucket) };
        if let Some(c) = counts {
            c[idx].fetch_add(1, Ordering::Relaxed);
        }
    };

    let mut i = lights.start;
    let mut j = heavies.start;
    let mut residual = match (carried, j < nh) {
        (_, false) => Compensated::INFINITY,
        (Some(spill), true) => Compensated::new(spill),
        (None, true) => Compensated::new(w[heavy[j] as usize]),
    };
    loop {
        let can_heavy = j < heavies.end;
        let can_light = i < lights.end;
        if !can_heavy && !can_light {
            return;
        }
        if can_heavy && (residual.value() <= bw || !can_light) {
            let h = heavy[j] as usize;
            let next = j + 1;
            let alias = if next < nh { heavy[next] as usize } else { h };
            let share = residual.value().clamp(0.0, bw);
            put(h, AliasBucket::new(share, h, alias));
            residual = if next < nh {
                Compensated::new(w[heavy[next] as usize]) + share - bw
            } else {
                Compensated::INFINITY
            };
            j = next;
        } else {
            let l = light[i] as usize;
            let alias = if j < nh { heavy[j] as usize } else { l };
            put(l, AliasBucket::new(w[l], l, alias));
            if j < nh {
                residual = residual + w[l] - bw;
            }
            i += 1;
        }
    }
}
