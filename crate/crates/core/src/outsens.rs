//! Output-sensitive sampling with replacement.
//!
//! Items are grouped by weight class `g = floor(log2(w / w_min))`, so group
//! `g` holds weights in `[a, 2a)` with `a = w_min 2^g`. Within a group, a
//! uniform index plus one acceptance test with probability `w / 2a` draws an
//! item in expected constant time. A complete binary tree of subtree weights
//! (a DC-tree) sits over the nonempty groups and another over the items of
//! each group; a query pushes its sample count down these trees with
//! binomial splits and stops wherever the count reaches zero, so the work
//! depends on the number of distinct items returned rather than on `k`.

use crate::error::Result;
use crate::par::counting_sort;
use crate::rng::{binomial_split, RngStream};
use crate::weights::WeightTable;
use rayon::prelude::*;
use std::collections::HashMap;

/// Below this many samples a subtree with at most twice as many items is
/// sampled directly instead of being split further.
pub const BASE_CASE_SAMPLES: u64 = 128;

/// Smallest sample count for which a parallel query forks at a tree node.
const PAR_CUTOFF: u64 = 1 << 12;

/// Stream tags for nodes of group trees start above every top-tree node id.
const GROUP_TAG_SHIFT: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SampleWithMultiplicity {
    pub item: usize,
    pub multiplicity: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Tree nodes touched by the descent, leaves and base cases included.
    pub visited: u64,
}

/// One nonempty weight class.
#[derive(Clone, Debug)]
pub struct Group {
    /// Weight class `g`: members satisfy `a <= w < 2a`.
    pub class: u32,
    /// Lower bound `a = w_min 2^g`.
    pub a: f64,
    /// Position of the first member in [`GroupedSampler::order`].
    pub start: usize,
    pub len: usize,
    pub weight: f64,
    leaves: usize,
    tree: usize,
}

impl Group {
    /// Capacity of each of the group's buckets.
    pub fn capacity(&self) -> f64 {
        2.0 * self.a
    }
}

/// Weight class of `w` relative to `w_min`, computed with exact power-of-two
/// comparisons rather than a rounded logarithm.
pub fn weight_class(w: f64, w_min: f64) -> u32 {
    debug_assert!(w >= w_min && w_min > 0.0);
    let mut g = (w / w_min).log2().floor().max(0.0) as i32;
    while g > 0 && w_min * 2f64.powi(g) > w {
        g -= 1;
    }
    while w_min * 2f64.powi(g + 1) <= w {
        g += 1;
    }
    g as u32
}

/// Writes the subtree sums of an implicit heap over `leaves` into `nodes`
/// (root at 1, leaf `i` at `L + i`, `L = nodes.len() / 2`), padding with zeros.
fn build_tree(nodes: &mut [f64], leaves: &[f64]) {
    let l = nodes.len() / 2;
    nodes[l..l + leaves.len()].copy_from_slice(leaves);
    nodes[l + leaves.len()..].fill(0.0);
    nodes[0] = 0.0;
    for v in (1..l).rev() {
        nodes[v] = nodes[2 * v] + nodes[2 * v + 1];
    }
}

/// Leaf positions `[lo, lo + width)` below node `v` of a tree with `l` leaves.
#[inline]
fn leaf_span(v: usize, l: usize) -> (usize, usize) {
    let level = usize::BITS - 1 - v.leading_zeros();
    let width = l >> level;
    ((v - (1 << level)) * width, width)
}

#[derive(Clone, Debug)]
pub struct GroupedSampler {
    n: usize,
    total: f64,
    w_min: f64,
    order: Vec<u32>,
    sorted: Vec<f64>,
    groups: Vec<Group>,
    trees: Vec<f64>,
    top: Vec<f64>,
    rel_weight: Vec<f64>,
    rel_prefix: Vec<f64>,
    count_prefix: Vec<usize>,
}

impl GroupedSampler {
    pub fn build(wt: &WeightTable, workers: usize) -> Result<GroupedSampler> {
        let w = wt.weights();
        let n = w.len();
        let w_min = wt.min();
        let keys: Vec<u32> = if workers <= 1 {
            w.iter().map(|&x| weight_class(x, w_min)).collect()
        } else {
            w.par_iter().map(|&x| weight_class(x, w_min)).collect()
        };
        let classes = weight_class(wt.max(), w_min) as usize + 1;
        let (order, starts) = counting_sort(&keys, classes, workers);
        let sorted: Vec<f64> = order.iter().map(|&i| w[i as usize]).collect();

        let mut groups = Vec::new();
        let mut tree_len = 0;
        for class in 0..classes {
            let (start, end) = (starts[class], starts[class + 1]);
            if end > start {
                let leaves = (end - start).next_power_of_two();
                groups.push(Group {
                    class: class as u32,
                    a: w_min * 2f64.powi(class as i32),
                    start,
                    len: end - start,
                    weight: 0.0,
                    leaves,
                    tree: tree_len,
                });
                tree_len += 2 * leaves;
            }
        }

        let mut trees = vec![0.0; tree_len];
        {
            let mut slices = Vec::with_capacity(groups.len());
            let mut rest = trees.as_mut_slice();
            for g in &groups {
                let (head, tail) = rest.split_at_mut(2 * g.leaves);
                slices.push((head, &sorted[g.start..g.start + g.len]));
                rest = tail;
            }
            if workers <= 1 {
                slices.into_iter().for_each(|(t, l)| build_tree(t, l));
            } else {
                slices.into_par_iter().for_each(|(t, l)| build_tree(t, l));
            }
        }
        for g in &mut groups {
            g.weight = trees[g.tree + 1];
        }

        let group_weights: Vec<f64> = groups.iter().map(|g| g.weight).collect();
        let mut top = vec![0.0; 2 * groups.len().next_power_of_two()];
        build_tree(&mut top, &group_weights);

        let total = wt.total();
        let rel_weight: Vec<f64> = group_weights.iter().map(|&x| x / total).collect();
        let mut rel_prefix = Vec::with_capacity(groups.len());
        let mut count_prefix = Vec::with_capacity(groups.len());
        let (mut h, mut c) = (0.0, 0);
        for (g, &r) in groups.iter().zip(&rel_weight) {
            h += r;
            c += g.len;
            rel_prefix.push(h);
            count_prefix.push(c);
        }

        Ok(GroupedSampler {
            n,
            total,
            w_min,
            order,
            sorted,
            groups,
            trees,
            top,
            rel_weight,
            rel_prefix,
            count_prefix,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    /// Nonempty groups in ascending weight class.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Item ids sorted by weight class (stable).
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn group_items(&self, q: usize) -> &[u32] {
        let g = &self.groups[q];
        &self.order[g.start..g.start + g.len]
    }

    /// Implicit heap of the top tree; leaves are the nonempty groups.
    pub fn top_tree(&self) -> &[f64] {
        &self.top
    }

    /// Implicit heap of group `q`'s tree; leaves are its members.
    pub fn group_tree(&self, q: usize) -> &[f64] {
        let g = &self.groups[q];
        &self.trees[g.tree..g.tree + 2 * g.leaves]
    }

    /// Weights in [`Self::order`] order.
    pub fn sorted_weights(&self) -> &[f64] {
        &self.sorted
    }

    /// `g_q`: weight of group `q` relative to `W`.
    pub fn relative_weights(&self) -> &[f64] {
        &self.rel_weight
    }

    /// `h_q = g_0 + ... + g_q`.
    pub fn relative_prefix(&self) -> &[f64] {
        &self.rel_prefix
    }

    /// `c_q`: number of items in groups `0..=q`.
    pub fn count_prefix(&self) -> &[usize] {
        &self.count_prefix
    }

    /// Checks that every interior node of every tree is the sum of its
    /// children, up to a few ulps per leaf below it.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let check = |name: &str, nodes: &[f64]| {
            let l = nodes.len() / 2;
            for v in 1..l {
                let sum = nodes[2 * v] + nodes[2 * v + 1];
                let (_, width) = leaf_span(v, l);
                let tol = 4.0 * f64::EPSILON * width as f64 * nodes[v].abs();
                if (nodes[v] - sum).abs() > tol {
                    return Err(format!("{name} node {v}: {} != {sum}", nodes[v]));
                }
            }
            Ok(())
        };
        check("top", &self.top)?;
        for q in 0..self.groups.len() {
            check(&format!("group {q}"), self.group_tree(q))?;
        }
        let total: f64 = self.top[1];
        if ((total - self.total) / self.total).abs() > 1e-9 {
            return Err(format!("tree total {total} differs from W = {}", self.total));
        }
        Ok(())
    }

    /// `k` draws with replacement, returned as distinct-item counts when
    /// `dedup` is set. Without it, small subtrees may report the same item
    /// more than once.
    pub fn sample_replacement(
        &self,
        k: u64,
        rng: &mut RngStream,
        dedup: bool,
    ) -> Vec<SampleWithMultiplicity> {
        self.sample_replacement_with(k, rng, dedup, 1).0
    }

    /// Like [`Self::sample_replacement`]; with `workers > 1` the descent
    /// forks at large nodes. Every node draws from its own stream derived
    /// from one key taken from `rng`, so the output is the same either way.
    pub fn sample_replacement_with(
        &self,
        k: u64,
        rng: &mut RngStream,
        dedup: bool,
        workers: usize,
    ) -> (Vec<SampleWithMultiplicity>, QueryStats) {
        let query = Query {
            gs: self,
            rng: rng.fork(),
            dedup,
            parallel: workers > 1,
        };
        let mut out = Vec::new();
        let visited = if k == 0 {
            0
        } else {
            query.top(1, k, &mut out)
        };
        let total: u64 = out.iter().map(|s| s.multiplicity).sum();
        assert_eq!(total, k, "multiplicities must add up to the sample size");
        (out, QueryStats { visited })
    }
}

struct Query<'a> {
    gs: &'a GroupedSampler,
    rng: RngStream,
    dedup: bool,
    parallel: bool,
}

impl Query<'_> {
    /// Runs both children, in parallel for large counts, appending the
    /// left output before the right one.
    fn fork<A, B>(&self, m: u64, out: &mut Vec<SampleWithMultiplicity>, a: A, b: B) -> u64
    where
        A: FnOnce(&mut Vec<SampleWithMultiplicity>) -> u64 + Send,
        B: FnOnce(&mut Vec<SampleWithMultiplicity>) -> u64 + Send,
    {
        if self.parallel && m >= PAR_CUTOFF {
            fn run<F>(f: F) -> (Vec<SampleWithMultiplicity>, u64)
            where
                F: FnOnce(&mut Vec<SampleWithMultiplicity>) -> u64,
            {
                let mut o = Vec::new();
                let v = f(&mut o);
                (o, v)
            }
            let ((lo, lv), (ro, rv)) = rayon::join(|| run(a), || run(b));
            out.extend(lo);
            out.extend(ro);
            lv + rv
        } else {
            a(out) + b(out)
        }
    }

    fn top(&self, v: usize, m: u64, out: &mut Vec<SampleWithMultiplicity>) -> u64 {
        let nodes = &self.gs.top;
        let l = nodes.len() / 2;
        if v >= l {
            return 1 + self.group(v - l, 1, m, out);
        }
        let mut r = self.rng.child(v as u64);
        let left = binomial_split(m, nodes[2 * v], nodes[2 * v + 1], &mut r);
        let right = m - left;
        1 + self.fork(
            m,
            out,
            |o| if left > 0 { self.top(2 * v, left, o) } else { 0 },
            |o| if right > 0 { self.top(2 * v + 1, right, o) } else { 0 },
        )
    }

    fn group(&self, q: usize, v: usize, m: u64, out: &mut Vec<SampleWithMultiplicity>) -> u64 {
        let gs = self.gs;
        let g = &gs.groups[q];
        let nodes = &gs.trees[g.tree..g.tree + 2 * g.leaves];
        let l = g.leaves;
        if v >= l {
            let item = gs.order[g.start + v - l] as usize;
            out.push(SampleWithMultiplicity {
                item,
                multiplicity: m,
            });
            return 1;
        }
        let (lo, width) = leaf_span(v, l);
        let count = (lo + width).min(g.len) - lo;
        let tag = (((q as u64) + 1) << GROUP_TAG_SHIFT) | v as u64;
        let mut r = self.rng.child(tag);
        if m == 1 || (m < BASE_CASE_SAMPLES && count as u64 <= 2 * m) {
            self.base_case(g, lo, count, m, &mut r, out);
            return 1;
        }
        let left = binomial_split(m, nodes[2 * v], nodes[2 * v + 1], &mut r);
        let right = m - left;
        1 + self.fork(
            m,
            out,
            |o| if left > 0 { self.group(q, 2 * v, left, o) } else { 0 },
            |o| if right > 0 { self.group(q, 2 * v + 1, right, o) } else { 0 },
        )
    }

    /// `m` independent rejection draws from group members `lo..lo + count`.
    fn base_case(
        &self,
        g: &Group,
        lo: usize,
        count: usize,
        m: u64,
        r: &mut RngStream,
        out: &mut Vec<SampleWithMultiplicity>,
    ) {
        let gs = self.gs;
        let cap = g.capacity();
        let mut draw = || loop {
            let j = g.start + lo + r.below(count);
            if r.uniform01() * cap < gs.sorted[j] {
                return gs.order[j] as usize;
            }
        };
        if self.dedup && m > 1 {
            let mut seen: HashMap<usize, u64> = HashMap::with_capacity(m as usize);
            let mut first = Vec::new();
            for _ in 0..m {
                let item = draw();
                let e = seen.entry(item).or_insert(0);
                if *e == 0 {
                    first.push(item);
                }
                *e += 1;
            }
            out.extend(first.into_iter().map(|item| SampleWithMultiplicity {
                item,
                multiplicity: seen[&item],
            }));
        } else {
            for _ in 0..m {
                out.push(SampleWithMultiplicity {
                    item: draw(),
                    multiplicity: 1,
                });
            }
        }
    }
}

/// Adds up multiplicities per item, ordered by item id.
pub fn merge_counts(samples: &[SampleWithMultiplicity]) -> Vec<SampleWithMultiplicity> {
    let mut map: HashMap<usize, u64> = HashMap::new();
    for s in samples {
        *map.entry(s.item).or_insert(0) += s.multiplicity;
    }
    let mut v: Vec<SampleWithMultiplicity> = map
        .into_iter()
        .map(|(item, multiplicity)| SampleWithMultiplicity { item, multiplicity })
        .collect();
    v.sort_by_key(|s| s.item);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gs(w: Vec<f64>) -> GroupedSampler {
        GroupedSampler::build(&WeightTable::new(w).unwrap(), 1).unwrap()
    }

    #[test]
    fn classes() {
        assert_eq!(weight_class(1.0, 1.0), 0);
        assert_eq!(weight_class(5.0, 1.0), 2);
        assert_eq!(weight_class(8.0, 1.0), 3);
        assert_eq!(weight_class(7.999_999, 1.0), 2);
        assert_eq!(weight_class(0.3, 0.1), 1);
    }

    #[test]
    fn uniform_is_one_group() {
        let s = gs(vec![2.0; 5]);
        assert_eq!(s.groups().len(), 1);
        assert_eq!(s.top_tree().len(), 2);
        assert_eq!(s.top_tree()[1], 10.0);
        s.audit().unwrap();
    }

    #[test]
    fn powers_of_two_top_tree() {
        let s = gs(vec![8.0, 1.0, 4.0, 2.0]);
        assert_eq!(s.groups().len(), 4);
        assert!(s.groups().iter().all(|g| g.len == 1));
        assert_eq!(&s.top_tree()[1..4], &[15.0, 3.0, 12.0]);
        assert_eq!(s.count_prefix(), &[1, 2, 3, 4]);
        assert_eq!(s.relative_prefix()[3], 1.0);
        s.audit().unwrap();
    }

    #[test]
    fn members_lie_in_their_class() {
        let mut r = RngStream::new(4, 4);
        let w: Vec<f64> = (0..5000).map(|_| (r.uniform_open() * 40.0).exp2()).collect();
        let s = GroupedSampler::build(&WeightTable::new(w.clone()).unwrap(), 3).unwrap();
        let mut seen = 0;
        for (q, g) in s.groups().iter().enumerate() {
            for &i in s.group_items(q) {
                let x = w[i as usize];
                assert!(g.a <= x && x < 2.0 * g.a);
            }
            seen += g.len;
        }
        assert_eq!(seen, w.len());
        s.audit().unwrap();
    }

    #[test]
    fn trivial_queries() {
        let s = gs(vec![3.0, 1.0, 1.0, 1.0]);
        let mut r = RngStream::new(1, 0);
        assert!(s.sample_replacement(0, &mut r, true).is_empty());
        let one = gs(vec![0.7]);
        assert_eq!(
            one.sample_replacement(9, &mut r, true),
            vec![SampleWithMultiplicity {
                item: 0,
                multiplicity: 9
            }]
        );
    }

    #[test]
    fn two_item_group_frequencies() {
        let s = gs(vec![1.0, 1.9]);
        assert_eq!(s.groups().len(), 1);
        let mut r = RngStream::new(3, 3);
        let m = 100_000u64;
        let out = merge_counts(&s.sample_replacement(m, &mut r, true));
        let p = 1.0 / 2.9;
        let c0 = out.iter().find(|x| x.item == 0).map_or(0, |x| x.multiplicity);
        let sd = (m as f64 * p * (1.0 - p)).sqrt();
        assert!((c0 as f64 - m as f64 * p).abs() < 4.0 * sd);
    }

    #[test]
    fn dedup_and_parallel_agree() {
        let mut r = RngStream::new(9, 9);
        let w: Vec<f64> = (1..=3000).map(|i| (i as f64).powf(-1.5)).collect();
        let s = GroupedSampler::build(&WeightTable::new(w).unwrap(), 2).unwrap();
        for k in [1u64, 50, 1000, 100_000] {
            let seed = r.clone();
            let (os, _) = s.sample_replacement_with(k, &mut seed.clone(), true, 1);
            let (nd, _) = s.sample_replacement_with(k, &mut seed.clone(), false, 1);
            let (par, _) = s.sample_replacement_with(k, &mut seed.clone(), true, 4);
            let mut items: Vec<usize> = os.iter().map(|x| x.item).collect();
            items.sort_unstable();
            items.dedup();
            assert_eq!(items.len(), os.len(), "dedup output repeats an item");
            assert_eq!(merge_counts(&os), merge_counts(&nd));
            assert_eq!(os, par);
            r.uniform01();
        }
    }

    #[test]
    fn mean_multiplicity() {
        let s = gs(vec![3.0, 1.0, 1.0, 1.0]);
        let mut r = RngStream::new(21, 0);
        let trials = 100_000;
        let mut sum = 0u64;
        for _ in 0..trials {
            for x in s.sample_replacement(4, &mut r, true) {
                if x.item == 0 {
                    sum += x.multiplicity;
                }
            }
        }
        let mean = sum as f64 / trials as f64;
        // Binomial(4, 1/2) has variance 1.
        assert!((mean - 2.0).abs() < 4.0 / (trials as f64).sqrt(), "mean {mean}");
    }
}
