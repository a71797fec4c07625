//! Two-level alias table: items are cut into contiguous groups, each group
//! gets its own alias table, and a meta table over the group totals picks
//! the group first.

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::par::{balanced_ranges, map_tasks};
use crate::rng::RngStream;
use crate::sampler::Sampler;
use crate::weights::WeightTable;

/// Sequential builder used for the local and meta tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalBuilder {
    Vose,
    Sweep,
}

impl LocalBuilder {
    fn build(self, wt: &WeightTable) -> AliasTable {
        match self {
            LocalBuilder::Vose => AliasTable::build_vose(wt),
            LocalBuilder::Sweep => AliasTable::build_sweep(wt),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TwoLevelTable {
    meta: AliasTable,
    locals: Vec<AliasTable>,
    /// `offsets[g]` is the global index of the first item of group `g`;
    /// one extra entry holds `n`.
    offsets: Vec<usize>,
}

impl TwoLevelTable {
    /// Builds `groups` local tables in parallel, then the meta table.
    ///
    /// Group `g` holds items `g*n/groups .. (g+1)*n/groups`, so every group
    /// is nonempty and sizes differ by at most one.
    pub fn build(
        wt: &WeightTable,
        groups: usize,
        base: LocalBuilder,
        workers: usize,
    ) -> Result<TwoLevelTable> {
        let n = wt.len();
        if groups == 0 || groups > n {
            return Err(Error::InvalidArgument(format!(
                "group count {groups} outside 1..={n}"
            )));
        }
        let ranges = balanced_ranges(n, groups);
        let w = wt.weights();
        let locals: Vec<AliasTable> = map_tasks(workers, groups, |g| {
            let local = WeightTable::new(w[ranges[g].clone()].to_vec())
                .expect("slices of a valid table are valid");
            base.build(&local)
        });
        let group_weights: Vec<f64> = locals.iter().map(AliasTable::total).collect();
        let meta = base.build(&WeightTable::new(group_weights)?);
        let mut offsets: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        offsets.push(n);
        Ok(TwoLevelTable {
            meta,
            locals,
            offsets,
        })
    }

    pub fn meta(&self) -> &AliasTable {
        &self.meta
    }

    pub fn locals(&self) -> &[AliasTable] {
        &self.locals
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn group_count(&self) -> usize {
        self.locals.len()
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> f64 {
        self.meta.total()
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let g = self.meta.sample(rng);
        self.offsets[g] + self.locals[g].sample(rng)
    }
}

impl Sampler for TwoLevelTable {
    fn draw(&self, rng: &mut RngStream) -> usize {
        self.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn composed_masses(t: &TwoLevelTable) -> Vec<f64> {
        let mut m = vec![0.0; t.len()];
        let meta = t.meta();
        let mbw = meta.bucket_weight();
        let mut group_mass = vec![0.0; t.group_count()];
        for b in meta.buckets() {
            group_mass[b.item()] += b.share.min(mbw);
            group_mass[b.alias()] += mbw - b.share.min(mbw);
        }
        for (g, local) in t.locals().iter().enumerate() {
            let bw = local.bucket_weight();
            for b in local.buckets() {
                let base = t.offsets()[g];
                m[base + b.item()] += b.share.min(bw) * group_mass[g] / local.total();
                m[base + b.alias()] += (bw - b.share.min(bw)) * group_mass[g] / local.total();
            }
        }
        m
    }

    #[test]
    fn rejects_bad_group_counts() {
        let wt = WeightTable::new(vec![1.0, 2.0]).unwrap();
        assert!(TwoLevelTable::build(&wt, 0, LocalBuilder::Vose, 1).is_err());
        assert!(TwoLevelTable::build(&wt, 3, LocalBuilder::Vose, 1).is_err());
    }

    #[test]
    fn single_group_is_flat() {
        let wt = WeightTable::new(vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        let t = TwoLevelTable::build(&wt, 1, LocalBuilder::Sweep, 1).unwrap();
        assert_eq!(t.meta().len(), 1);
        let flat = AliasTable::build_sweep(&wt);
        assert_eq!(t.locals()[0].buckets(), flat.buckets());
        // The meta draw consumes two variates; afterwards both tables see the
        // same stream position only if we skip them, so compare frequencies.
        let a = t.sample_many(200_000, 1, 3);
        let b = flat.sample_many(200_000, 1, 3);
        let fa = a.iter().filter(|&&i| i == 0).count() as f64 / 2e5;
        let fb = b.iter().filter(|&&i| i == 0).count() as f64 / 2e5;
        assert!((fa - 0.5).abs() < 0.005 && (fb - 0.5).abs() < 0.005);
    }

    #[test]
    fn one_item_per_group() {
        let w = vec![5.0, 1.0, 2.0, 2.0];
        let wt = WeightTable::new(w.clone()).unwrap();
        let t = TwoLevelTable::build(&wt, 4, LocalBuilder::Vose, 2).unwrap();
        assert!(t.locals().iter().all(|l| l.len() == 1));
        for (m, w) in composed_masses(&t).iter().zip(&w) {
            assert!((m - w).abs() < 1e-12);
        }
    }

    #[test]
    fn composed_masses_three_one_one_one() {
        let w = vec![3.0, 1.0, 1.0, 1.0];
        let wt = WeightTable::new(w.clone()).unwrap();
        for base in [LocalBuilder::Vose, LocalBuilder::Sweep] {
            let t = TwoLevelTable::build(&wt, 2, base, 2).unwrap();
            assert_eq!(t.offsets(), &[0, 2, 4]);
            for (m, w) in composed_masses(&t).iter().zip(&w) {
                assert!(((m - w) / w).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frequencies_three_one_one_one() {
        let wt = WeightTable::new(vec![3.0, 1.0, 1.0, 1.0]).unwrap();
        let t = TwoLevelTable::build(&wt, 2, LocalBuilder::Sweep, 2).unwrap();
        let draws = 1_000_000;
        let mut counts = [0u64; 4];
        for i in t.sample_many(draws, 4, 11) {
            counts[i] += 1;
        }
        let p = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (c, p) in counts.iter().zip(p) {
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - draws as f64 * p).abs() < 4.0 * sd);
        }
    }
}
