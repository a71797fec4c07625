//! Independent oracles and test statistics: masses implied by built tables,
//! exact small-instance distributions, Pearson chi-square and
//! Kolmogorov-Smirnov.

pub mod suites;

use crate::alias::AliasTable;
use crate::compressed::CompressedTable;
use crate::error::{Error, Result};
use crate::twolevel::TwoLevelTable;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Default significance level of every statistical check.
pub const ALPHA: f64 = 0.001;

/// Structures whose per-item probabilities can be read off their contents.
pub trait ImpliedMass {
    /// Per-item mass in weight units (summing to `W`), computed from the
    /// stored buckets with no randomness.
    fn implied_masses(&self) -> Vec<f64>;
}

impl ImpliedMass for AliasTable {
    fn implied_masses(&self) -> Vec<f64> {
        let bw = self.bucket_weight();
        let mut m = vec![0.0; self.len()];
        for b in self.buckets() {
            let own = b.share.clamp(0.0, bw);
            m[b.item()] += own;
            m[b.alias()] += bw - own;
        }
        m
    }
}

impl ImpliedMass for TwoLevelTable {
    fn implied_masses(&self) -> Vec<f64> {
        let group = self.meta().implied_masses();
        let mut m = vec![0.0; self.len()];
        for (g, local) in self.locals().iter().enumerate() {
            let base = self.offsets()[g];
            let scale = group[g] / local.total();
            for (i, x) in local.implied_masses().into_iter().enumerate() {
                m[base + i] = x * scale;
            }
        }
        m
    }
}

impl ImpliedMass for CompressedTable {
    fn implied_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.len()];
        for j in 0..self.bucket_count() {
            let item = self.owner(j);
            m[item] += if self.is_last_bucket(j) {
                self.residue(item)
            } else {
                1.0
            };
        }
        let sum: f64 = m.iter().sum();
        let scale = self.total() / sum;
        m.iter_mut().for_each(|x| *x *= scale);
        m
    }
}

/// Largest relative deviation `|m_i - w_i| / w_i`.
pub fn max_relative_error(masses: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(masses.len(), weights.len());
    masses
        .iter()
        .zip(weights)
        .map(|(m, w)| ((m - w) / w).abs())
        .fold(0.0, f64::max)
}

/// A finite distribution over outcomes of type `O`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution<O: Ord> {
    pub probs: BTreeMap<O, f64>,
}

impl<O: Ord + Clone> ExactDistribution<O> {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn prob(&self, outcome: &O) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn outcomes(&self) -> Vec<O> {
        self.probs.keys().cloned().collect()
    }

    /// Position of each outcome in [`Self::outcomes`] order.
    pub fn index(&self) -> BTreeMap<O, usize> {
        self.probs
            .keys()
            .cloned()
            .enumerate()
            .map(|(i, o)| (o, i))
            .collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.probs.values().copied().collect()
    }
}

fn guard(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::OracleGuard(what.to_string()))
    }
}

/// Distribution of the set of the first `k` items drawn one at a time
/// without replacement, by summing over all ordered `k`-tuples.
/// Subsets are listed as ascending index vectors.
pub fn enumerate_wrsn(weights: &[f64], k: usize) -> Result<ExactDistribution<Vec<usize>>> {
    let n = weights.len();
    guard(n >= 1 && n <= 8 && k <= 4 && k <= n, "enumerate_wrsn needs n <= 8, k <= min(4, n)")?;
    let total: f64 = weights.iter().sum();
    let mut probs = BTreeMap::new();
    let mut prefix = Vec::with_capacity(k);
    fn rec(
        w: &[f64],
        k: usize,
        remaining: f64,
        p: f64,
        prefix: &mut Vec<usize>,
        probs: &mut BTreeMap<Vec<usize>, f64>,
    ) {
        if prefix.len() == k {
            let mut set = prefix.clone();
            set.sort_unstable();
            *probs.entry(set).or_insert(0.0) += p;
            return;
        }
        for i in 0..w.len() {
            if prefix.contains(&i) {
                continue;
            }
            prefix.push(i);
            rec(w, k, remaining - w[i], p * w[i] / remaining, prefix, probs);
            prefix.pop();
        }
    }
    rec(weights, k, total, 1.0, &mut prefix, &mut probs);
    Ok(ExactDistribution { probs })
}

/// Probability that the first `|set|` distinct items are exactly `set`,
/// by inclusion-exclusion over exponential clocks:
/// `Σ_{S ⊆ A} (-1)^|S| R / (R + w_S)` with `R` the weight outside `A`.
pub fn wrsn_set_probability(weights: &[f64], set: &[usize]) -> f64 {
    let total: f64 = weights.iter().sum();
    let inside: f64 = set.iter().map(|&i| weights[i]).sum();
    let rest = total - inside;
    if set.len() == weights.len() {
        return 1.0;
    }
    let mut p = 0.0;
    for mask in 0u32..(1 << set.len()) {
        let ws: f64 = (0..set.len())
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| weights[set[b]])
            .sum();
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        p += sign * rest / (rest + ws);
    }
    p
}

/// Joint distribution of multiplicity vectors of `k` draws with replacement.
pub fn enumerate_multinomial(weights: &[f64], k: usize) -> Result<ExactDistribution<Vec<u64>>> {
    let n = weights.len();
    guard(n >= 1 && n <= 5 && k <= 6, "enumerate_multinomial needs n <= 5, k <= 6")?;
    let total: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let fact = |m: u64| (1..=m).map(|x| x as f64).product::<f64>();
    let mut probs = BTreeMap::new();
    let mut counts = vec![0u64; n];
    fn rec(
        i: usize,
        left: u64,
        counts: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(counts.clone());
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, out);
        }
    }
    let mut all = Vec::new();
    rec(0, k as u64, &mut counts, &mut all);
    for m in all {
        let mut pr = fact(k as u64);
        for (mi, pi) in m.iter().zip(&p) {
            pr *= pi.powi(*mi as i32) / fact(*mi);
        }
        probs.insert(m, pr);
    }
    Ok(ExactDistribution { probs })
}

/// Distribution of full orders produced by drawing all items one at a time.
pub fn enumerate_permutations(weights: &[f64]) -> Result<ExactDistribution<Vec<usize>>> {
    let n = weights.len();
    guard(n >= 1 && n <= 6, "enumerate_permutations needs n <= 6")?;
    let mut probs = BTreeMap::new();
    fn rec(
        w: &[f64],
        remaining: f64,
        p: f64,
        prefix: &mut Vec<usize>,
        probs: &mut BTreeMap<Vec<usize>, f64>,
    ) {
        if prefix.len() == w.len() {
            probs.insert(prefix.clone(), p);
            return;
        }
        for i in 0..w.len() {
            if !prefix.contains(&i) {
                prefix.push(i);
                let next = if prefix.len() == w.len() { 1.0 } else { w[i] / remaining };
                rec(w, remaining - w[i], p * next, prefix, probs);
                prefix.pop();
            }
        }
    }
    let total: f64 = weights.iter().sum();
    rec(weights, total, 1.0, &mut Vec::new(), &mut probs);
    Ok(ExactDistribution { probs })
}

/// Distribution of the number of successes among independent trials with
/// the given probabilities.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; pmf.len() + 1];
        for (j, &q) in pmf.iter().enumerate() {
            next[j] += q * (1.0 - p);
            next[j + 1] += q * p;
        }
        pmf = next;
    }
    pmf
}

/// `t_ℓ` with every item classified on its own: items with `w / W < 1/ℓ`
/// contribute `ℓ w / W`, the rest contribute one each.
pub fn item_exact_t(weights: &[f64], ell: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|&w| if w / total < 1.0 / ell { ell * w / total } else { 1.0 })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub alpha: f64,
    pub passed: bool,
}

/// Pearson goodness of fit of `observed` counts against `expected`
/// probabilities at level `alpha`. Cells expecting fewer than 5 counts are
/// pooled, smallest first.
pub fn chi_square(observed: &[u64], expected: &[f64], alpha: f64) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidArgument("cell count mismatch".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = expected.iter().sum();
    let mut cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| (p / total_p * n as f64, o as f64))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc.0 += e;
        acc.1 += o;
        if acc.0 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidArgument(
            "chi-square needs at least two cells after pooling".into(),
        ));
    }
    let statistic = pooled.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha);
    Ok(ChiSquare {
        statistic,
        dof,
        critical,
        alpha,
        passed: statistic <= critical,
    })
}

/// Kolmogorov-Smirnov distance between sorted `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Whether `observed` lies within `z` standard deviations of `expected`.
pub fn within_sigma(observed: f64, expected: f64, sd: f64, z: f64) -> bool {
    (observed - expected).abs() <= z * sd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alias::AliasTable;
    use crate::rng::RngStream;
    use crate::weights::WeightTable;

    #[test]
    fn masses_of_simple_tables() {
        let wt = WeightTable::new(vec![1.0; 4]).unwrap();
        assert_eq!(AliasTable::build_vose(&wt).implied_masses(), vec![1.0; 4]);
        let wt = WeightTable::new(vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        for m in [
            AliasTable::build_vose(&wt).implied_masses(),
            AliasTable::build_sweep(&wt).implied_masses(),
            AliasTable::build_psa(&wt, 2).implied_masses(),
            CompressedTable::build(&wt, 1).unwrap().implied_masses(),
        ] {
            assert!(max_relative_error(&m, wt.weights()) < 1e-12);
        }
    }

    #[test]
    fn corrupted_alias_is_caught() {
        let wt = WeightTable::new(vec![5.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        let good = AliasTable::build_vose(&wt);
        let mut buckets = good.buckets().to_vec();
        let b = buckets
            .iter_mut()
            .find(|b| b.share < wt.bucket_weight())
            .expect("some bucket has an alias");
        b.items[1] = (b.items[1] + 1) % 5;
        let bad = AliasTable::from_parts(buckets, wt.total()).unwrap();
        assert!(max_relative_error(&bad.implied_masses(), wt.weights()) > 1e-3);

        let mut counts = vec![0u64; 5];
        let mut rng = RngStream::new(9, 0);
        for _ in 0..200_000 {
            counts[bad.sample(&mut rng)] += 1;
        }
        let expected: Vec<f64> = wt.weights().iter().map(|w| w / wt.total() * 2e5).collect();
        assert!(!chi_square(&counts, &expected, ALPHA).unwrap().passed);
    }

    #[test]
    fn wrsn_by_hand() {
        let d = enumerate_wrsn(&[2.0, 1.0, 1.0], 2).unwrap();
        assert!((d.prob(&vec![0, 1]) - 5.0 / 12.0).abs() < 1e-15);
        assert!((d.prob(&vec![0, 2]) - 5.0 / 12.0).abs() < 1e-15);
        assert!((d.prob(&vec![1, 2]) - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-12);
        let full = enumerate_wrsn(&[2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(full.probs.len(), 1);
        assert!((full.prob(&vec![0, 1, 2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrsn_uniform_is_symmetric() {
        let d = enumerate_wrsn(&[1.0; 5], 2).unwrap();
        assert_eq!(d.probs.len(), 10);
        for p in d.probabilities() {
            assert!((p - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn wrsn_paths_agree() {
        let mut r = RngStream::new(1, 1);
        for n in 1..=8 {
            for k in 1..=n.min(4) {
                let w: Vec<f64> = (0..n).map(|_| (r.uniform01() * 8.0).exp2()).collect();
                let d = enumerate_wrsn(&w, k).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-12);
                for (set, p) in &d.probs {
                    let q = wrsn_set_probability(&w, set);
                    assert!((p - q).abs() < 1e-12, "n {n} k {k} {set:?}: {p} vs {q}");
                }
            }
        }
        assert!(enumerate_wrsn(&[1.0; 9], 2).is_err());
    }

    #[test]
    fn multinomial() {
        let d = enumerate_multinomial(&[1.0, 1.0], 2).unwrap();
        assert_eq!(d.prob(&vec![2, 0]), 0.25);
        assert_eq!(d.prob(&vec![1, 1]), 0.5);
        assert_eq!(d.prob(&vec![0, 2]), 0.25);
        let z = enumerate_multinomial(&[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(z.probs.len(), 1);
        assert_eq!(z.prob(&vec![0, 0, 0]), 1.0);
        let d = enumerate_multinomial(&[3.0, 1.0, 1.0, 1.0], 4).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(enumerate_multinomial(&[1.0; 6], 2).is_err());
    }

    #[test]
    fn permutations() {
        let d = enumerate_permutations(&[2.0, 1.0]).unwrap();
        assert!((d.prob(&vec![0, 1]) - 2.0 / 3.0).abs() < 1e-15);
        let d = enumerate_permutations(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.probs.len(), 24);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_binomial_matches_binomial() {
        let pmf = poisson_binomial(&[0.5; 4]);
        assert_eq!(pmf, vec![1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0]);
    }

    #[test]
    fn chi_square_accepts_exact_counts() {
        let c = chi_square(&[250, 250, 250, 250], &[0.25; 4], ALPHA).unwrap();
        assert!(c.passed);
        assert_eq!(c.statistic, 0.0);
        assert_eq!(c.dof, 3);
        assert!((c.critical - 16.266).abs() < 1e-3);
        assert!(chi_square(&[10], &[1.0], ALPHA).is_err());
    }

    #[test]
    fn chi_square_rejects_swapped_probabilities() {
        let wt = WeightTable::new(vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        let t = AliasTable::build_sweep(&wt);
        let mut counts = [0u64; 4];
        let mut r = RngStream::new(2, 2);
        for _ in 0..1_000_000 {
            counts[t.sample(&mut r)] += 1;
        }
        let right = chi_square(&counts, &[3.0, 1.0, 1.0, 1.0], ALPHA).unwrap();
        let wrong = chi_square(&counts, &[1.0, 3.0, 1.0, 1.0], ALPHA).unwrap();
        assert!(right.passed);
        assert!(!wrong.passed);
    }

    #[test]
    fn chi_square_uniform_smoke() {
        let mut r = RngStream::new(3, 3);
        let mut counts = [0u64; 100];
        for _ in 0..100_000 {
            counts[r.below(100)] += 1;
        }
        assert!(chi_square(&counts, &[1.0; 100], ALPHA).unwrap().passed);
    }

    #[test]
    fn chi_square_pools_sparse_cells() {
        // Expected counts 2991, 3, 3, 3: two small cells pool to 6 and the
        // third joins the large one.
        let c = chi_square(&[2990, 4, 3, 3], &[0.997, 0.001, 0.001, 0.001], ALPHA).unwrap();
        assert_eq!(c.dof, 1);
        assert!(c.passed);
        assert!(chi_square(&[1000, 0, 0, 1], &[0.997, 0.001, 0.001, 0.001], ALPHA).is_err());
    }

    #[test]
    fn ks_uniform() {
        let mut r = RngStream::new(4, 4);
        let mut u: Vec<f64> = (0..10_000).map(|_| r.uniform01()).collect();
        u.sort_unstable_by(f64::total_cmp);
        assert!(ks_statistic(&u, |x| x) < ks_critical(u.len(), ALPHA));
        assert!((ks_critical(100_000, 0.001) - 1.9495 / 100_000f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn exact_t_brackets() {
        let w = [0.5, 0.25, 0.125, 0.125];
        assert_eq!(item_exact_t(&w, 4.0), 3.0);
        assert_eq!(item_exact_t(&w, 1.0), 1.0);
    }
}
