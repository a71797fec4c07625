//! Sampling `k` distinct items without replacement by oversampling with
//! replacement and downsampling.
//!
//! An `ℓ`-sample with replacement is drawn from a [`GroupedSampler`], with
//! `ℓ` chosen so the estimated number of distinct items `t_ℓ` is about `2k`.
//! The items seen form the first distinct items of an i.i.d. draw sequence;
//! ordering them by first appearance and keeping the first `k` yields an
//! exact weighted sample without replacement. Within one batch of draws the
//! first-appearance order of a uniformly arranged multiset is the order of
//! independent `Exp(m_i)` clocks, `m_i` being the item's multiplicity in the
//! batch. A batch with fewer than `k` distinct items is kept and followed by
//! another batch rather than discarded.

use crate::error::{Error, Result};
use crate::outsens::GroupedSampler;
use crate::rng::{exponential_key, RngStream};

/// Largest oversample size accepted.
pub const MAX_OVERSAMPLE: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllEstimate {
    pub ell: u64,
    /// Estimated distinct items `t_ℓ` for this `ℓ`.
    pub t: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoReplaceStats {
    pub ell: u64,
    pub t: f64,
    /// Batches of `ℓ` draws taken.
    pub batches: u32,
    /// Batches that ended with fewer than `k` distinct items in total.
    pub rejections: u32,
}

/// Number of leading groups that count as light at oversample size `ell`:
/// group `q` is light when `2 a_q ℓ <= W`, i.e. all its weights are below
/// `W / ℓ`.
fn light_groups(gs: &GroupedSampler, ell: f64) -> usize {
    let w = gs.total();
    gs.groups().partition_point(|g| 2.0 * g.a * ell <= w)
}

/// `t_ℓ = ℓ h_i + (n - c_i)` where groups `0..=i` are light at `ℓ`.
pub fn estimate_t(gs: &GroupedSampler, ell: f64) -> f64 {
    let i = light_groups(gs, ell);
    if i == 0 {
        gs.len() as f64
    } else {
        ell * gs.relative_prefix()[i - 1] + (gs.len() - gs.count_prefix()[i - 1]) as f64
    }
}

/// Smallest integer `ℓ >= k` with `t_ℓ >= min(2k, n)`.
///
/// `t` is piecewise linear and nondecreasing in `ℓ`, with breakpoints at
/// `λ_q = W / (2 a_q)`. A binary search over the groups finds the segment
/// and a linear solve finds `ℓ` inside it.
pub fn choose_ell(gs: &GroupedSampler, k: usize) -> Result<EllEstimate> {
    let n = gs.len();
    if k > n {
        return Err(Error::SampleTooLarge { k, n });
    }
    let target = (2 * k).min(n) as f64;
    let groups = gs.groups();
    let lambda = |q: usize| gs.total() / (2.0 * groups[q].a);
    let g = groups.len();
    // Value of t at group q's own breakpoint, where q is still light.
    let at_breakpoint = |q: usize| {
        lambda(q) * gs.relative_prefix()[q] + (n - gs.count_prefix()[q]) as f64
    };
    // Breakpoints ascend as q descends. Find the first one (from the
    // heaviest group down) at which t already reaches the target.
    let p = (0..g)
        .collect::<Vec<_>>()
        .partition_point(|&p| at_breakpoint(g - 1 - p) < target);
    let lower = if p == 0 { 0.0 } else { lambda(g - p) };
    // Inside (lower, λ_{g-1-p}] groups 0..g-p are light.
    let light = g - p;
    let real = if light == 0 {
        0.0
    } else {
        let h = gs.relative_prefix()[light - 1];
        let heavy = (n - gs.count_prefix()[light - 1]) as f64;
        (target - heavy) / h
    };
    let floor = if p == 0 { 1.0 } else { lower.floor() + 1.0 };
    let mut ell = real.ceil().max(floor).max(k as f64);
    if ell > MAX_OVERSAMPLE as f64 {
        return Err(Error::OversampleTooLarge { ell });
    }
    // Rounding at the segment ends can leave the estimate one step off.
    while estimate_t(gs, ell) < target && ell <= MAX_OVERSAMPLE as f64 {
        ell += 1.0;
    }
    while ell - 1.0 >= (k as f64).max(1.0) && estimate_t(gs, ell - 1.0) >= target {
        ell -= 1.0;
    }
    if ell > MAX_OVERSAMPLE as f64 {
        return Err(Error::OversampleTooLarge { ell });
    }
    Ok(EllEstimate {
        ell: ell as u64,
        t: estimate_t(gs, ell),
    })
}

/// `k` distinct items; the chance of any particular outcome equals that of
/// drawing items one at a time with probability proportional to weight
/// among those not yet drawn.
///
/// Items come back in ascending id order, except for `k = n`, which returns
/// all items as a weighted random permutation.
pub fn sample_no_replacement(
    gs: &GroupedSampler,
    k: usize,
    rng: &mut RngStream,
    workers: usize,
) -> Result<(Vec<usize>, NoReplaceStats)> {
    let n = gs.len();
    if k > n {
        return Err(Error::SampleTooLarge { k, n });
    }
    if k == 0 {
        return Ok((Vec::new(), NoReplaceStats::default()));
    }
    if k == n {
        let mut keyed: Vec<(f64, usize)> = gs
            .order()
            .iter()
            .zip(gs.sorted_weights())
            .map(|(&i, &w)| (exponential_key(w, rng), i as usize))
            .collect();
        keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let stats = NoReplaceStats {
            ell: 0,
            t: n as f64,
            batches: 0,
            rejections: 0,
        };
        return Ok((keyed.into_iter().map(|(_, i)| i).collect(), stats));
    }

    let est = choose_ell(gs, k)?;
    let mut stats = NoReplaceStats {
        ell: est.ell,
        t: est.t,
        ..Default::default()
    };
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken: Vec<bool> = Vec::new();
    loop {
        stats.batches += 1;
        let (batch, _) = gs.sample_replacement_with(est.ell, rng, true, workers);
        if taken.is_empty() && batch.len() >= k {
            // Common case: one batch suffices and nothing is taken yet.
            // Deduplicated batches list each item once.
            let mut keyed: Vec<(f64, usize)> = batch
                .iter()
                .map(|s| (exponential_key(s.multiplicity as f64, rng), s.item))
                .collect();
            select_smallest(&mut keyed, k);
            chosen.extend(keyed[..k].iter().map(|&(_, i)| i));
            break;
        }
        if taken.is_empty() {
            taken = vec![false; n];
        }
        let fresh: Vec<(usize, u64)> = batch
            .iter()
            .filter(|s| !taken[s.item])
            .map(|s| (s.item, s.multiplicity))
            .collect();
        let need = k - chosen.len();
        if fresh.len() < need {
            stats.rejections += 1;
            for &(i, _) in &fresh {
                taken[i] = true;
                chosen.push(i);
            }
            continue;
        }
        let mut keyed: Vec<(f64, usize)> = fresh
            .into_iter()
            .map(|(item, m)| (exponential_key(m as f64, rng), item))
            .collect();
        select_smallest(&mut keyed, need);
        chosen.extend(keyed[..need].iter().map(|&(_, i)| i));
        break;
    }
    chosen.sort_unstable();
    debug_assert!(chosen.windows(2).all(|w| w[0] < w[1]));
    Ok((chosen, stats))
}

/// Moves the `k` smallest keys (ties by item) to the front.
fn select_smallest(keyed: &mut [(f64, usize)], k: usize) {
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightTable;

    fn gs(w: Vec<f64>) -> GroupedSampler {
        GroupedSampler::build(&WeightTable::new(w).unwrap(), 1).unwrap()
    }

    #[test]
    fn t_for_four_items() {
        let s = gs(vec![0.5, 0.25, 0.125, 0.125]);
        assert_eq!(estimate_t(&s, 4.0), 3.0);
        // Closed form E[X] = Σ 1 - (1 - w_i)^ℓ lies in [(1 - 1/e) t, t].
        let ex: f64 = [0.5f64, 0.25, 0.125, 0.125]
            .iter()
            .map(|w| 1.0 - (1.0 - w).powi(4))
            .sum();
        assert!((ex - 2.449).abs() < 1e-3);
        assert!(ex >= (1.0 - (-1f64).exp()) * 3.0 && ex <= 3.0);
    }

    #[test]
    fn t_edges() {
        let uniform = gs(vec![1.0; 10]);
        assert_eq!(estimate_t(&uniform, 10.0), 10.0);
        let s = gs(vec![0.5, 0.25, 0.125, 0.125]);
        assert!(estimate_t(&s, 1.0) <= 1.0);
    }

    #[test]
    fn t_is_nondecreasing() {
        let mut r = RngStream::new(5, 5);
        let w: Vec<f64> = (0..200).map(|_| (r.uniform_open() * 20.0).exp2()).collect();
        let s = gs(w);
        let mut prev = 0.0;
        for e in 0..4000 {
            let ell = 1.0 + e as f64 * 0.37;
            let t = estimate_t(&s, ell);
            assert!(t >= prev, "t dropped at ell {ell}");
            prev = t;
        }
    }

    #[test]
    fn ell_is_minimal() {
        let mut r = RngStream::new(6, 6);
        for _ in 0..50 {
            let n = 1 + r.below(300);
            let w: Vec<f64> = (0..n).map(|_| (r.uniform_open() * 12.0).exp2()).collect();
            let s = gs(w);
            let k = 1 + r.below(n);
            let est = choose_ell(&s, k).unwrap();
            let target = (2 * k).min(n) as f64;
            assert!(est.t >= target && est.ell >= k as u64);
            if est.ell > k as u64 {
                assert!(estimate_t(&s, (est.ell - 1) as f64) < target, "{est:?} k {k}");
            }
        }
    }

    #[test]
    fn uniform_quarter_ell() {
        let n = 4000;
        let s = gs(vec![1.0; n]);
        let k = n / 4;
        let est = choose_ell(&s, k).unwrap();
        assert!(est.ell >= 2 * k as u64 && est.ell <= 4 * k as u64, "{est:?}");
    }

    #[test]
    fn four_items_k_one() {
        let s = gs(vec![0.5, 0.25, 0.125, 0.125]);
        let est = choose_ell(&s, 1).unwrap();
        assert!(est.t >= 2.0);
        assert!(estimate_t(&s, est.ell as f64) >= 2.0);
    }

    #[test]
    fn too_large() {
        let s = gs(vec![1.0, 2.0]);
        assert!(matches!(
            sample_no_replacement(&s, 3, &mut RngStream::new(0, 0), 1),
            Err(Error::SampleTooLarge { .. })
        ));
        // A few astronomically light items need an oversample beyond the cap.
        let mut w = vec![1.0; 4];
        w.extend([1e-300; 4]);
        let s = gs(w);
        assert!(matches!(choose_ell(&s, 3), Err(Error::OversampleTooLarge { .. })));
    }

    #[test]
    fn trivial_sizes() {
        let mut r = RngStream::new(1, 1);
        let one = gs(vec![4.0]);
        assert_eq!(sample_no_replacement(&one, 1, &mut r, 1).unwrap().0, vec![0]);
        let s = gs(vec![2.0, 1.0, 1.0, 5.0]);
        let mut all = sample_no_replacement(&s, 4, &mut r, 1).unwrap().0;
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn inclusion_two_one_one() {
        let s = gs(vec![2.0, 1.0, 1.0]);
        let mut r = RngStream::new(12, 0);
        let trials = 1_000_000;
        let mut hits = [0u64; 3];
        for _ in 0..trials {
            let (out, _) = sample_no_replacement(&s, 2, &mut r, 1).unwrap();
            assert_eq!(out.len(), 2);
            for i in out {
                hits[i] += 1;
            }
        }
        for (h, p) in hits.iter().zip([5.0 / 6.0, 7.0 / 12.0, 7.0 / 12.0]) {
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!((*h as f64 - trials as f64 * p).abs() < 4.0 * sd, "{hits:?}");
        }
    }
}
