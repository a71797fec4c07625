//! The acceptance criteria as runnable checks. Each returns a [`Report`]
//! with a one-line summary; nothing here panics on a failed check.

use super::*;
use crate::alias::{AliasMethod, AliasTable};
use crate::inputs::{generate, Distribution};
use crate::noreplace::{estimate_t, sample_no_replacement};
use crate::outsens::{merge_counts, GroupedSampler};
use crate::permute::{
    bucket_occupancy_audit, exponential_keys, permutation_from_keys, weighted_permutation,
};
use crate::reservoir::{MiniBatch, ReservoirSampler};
use crate::rng::RngStream;
use crate::sampler::Sampler;
use crate::subset::SubsetSampler;
use crate::twolevel::{LocalBuilder, TwoLevelTable};
use crate::weights::WeightTable;
use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct Report {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Soft criteria only warn when they fail.
    pub soft: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl Report {
    /// Whether the criterion blocks acceptance.
    pub fn ok(&self) -> bool {
        self.passed || self.soft
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.soft) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "criterion {:>2} {:<28} {} ({:.1}s",
            self.id,
            self.name,
            status,
            self.elapsed.as_secs_f64()
        )?;
        if let Some(l) = self.limit {
            write!(f, " of {}s", l.as_secs())?;
        }
        write!(f, ") {}", self.detail)
    }
}

/// Named groups of criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Masses,
    Oracle,
    Chisq,
    Bounds,
    All,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Masses => &[1],
            Suite::Chisq => &[2, 6, 7],
            Suite::Oracle => &[3, 5, 8],
            Suite::Bounds => &[4, 10],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "masses" => Ok(Suite::Masses),
            "oracle" => Ok(Suite::Oracle),
            "chisq" => Ok(Suite::Chisq),
            "bounds" => Ok(Suite::Bounds),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite {s:?}")),
        }
    }
}

/// Runs criterion `id` with `seed`.
pub fn run(id: u8, seed: u64) -> Report {
    match id {
        1 => implied_masses_exact(seed),
        2 => single_draw_chi_square(seed),
        3 => with_replacement_oracle(seed),
        4 => unique_count_bounds(seed),
        5 => without_replacement_oracle(seed),
        6 => permutation_checks(seed),
        7 => subset_checks(seed),
        8 => reservoir_checks(seed),
        9 => parallel_scaling(seed),
        10 => output_sensitivity(seed),
        _ => panic!("no criterion {id}"),
    }
}

pub fn run_suite(suite: Suite, seed: u64, mut each: impl FnMut(&Report)) -> Vec<Report> {
    suite
        .criteria()
        .iter()
        .map(|&id| {
            let r = run(id, seed);
            each(&r);
            r
        })
        .collect()
}

/// Collects failures and a summary while a criterion runs.
struct Check {
    id: u8,
    name: &'static str,
    start: Instant,
    limit: Option<Duration>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new(id: u8, name: &'static str, limit_secs: Option<u64>) -> Check {
        Check {
            id,
            name,
            start: Instant::now(),
            limit: limit_secs.map(Duration::from_secs),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn finish(self, soft: bool) -> Report {
        let elapsed = self.start.elapsed();
        let mut failures = self.failures;
        if let Some(l) = self.limit {
            if elapsed > l {
                failures.push(format!("runtime {:.1}s over {}s", elapsed.as_secs_f64(), l.as_secs()));
            }
        }
        let mut detail = self.notes.join("; ");
        if !failures.is_empty() {
            let shown: Vec<&str> = failures.iter().take(3).map(String::as_str).collect();
            detail = format!(
                "{} failure(s): {}{}; {detail}",
                failures.len(),
                shown.join(" | "),
                if failures.len() > 3 { " | ..." } else { "" }
            );
        }
        Report {
            id: self.id,
            name: self.name,
            passed: failures.is_empty(),
            soft,
            detail,
            elapsed,
            limit: self.limit,
        }
    }
}

/// Small random fixture weights; `style` cycles through flat, mildly
/// skewed, wide-ratio and tied shapes.
fn fixture_weights(rng: &mut RngStream, n: usize, style: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match style % 4 {
            0 => 1.0 - rng.uniform01(),
            1 => (rng.uniform01() * 3.0).exp2(),
            2 => (rng.uniform01() * 12.0).exp2(),
            _ => [1.0, 2.0, 2.0, 0.5][i % 4],
        })
        .collect()
}

fn table(w: Vec<f64>) -> WeightTable {
    WeightTable::new(w).expect("fixture weights are valid")
}

fn chi_square_into(
    check: &mut Check,
    label: &str,
    observed: &[u64],
    expected: &[f64],
    alpha: f64,
) {
    match chi_square(observed, expected, alpha) {
        Ok(c) => check.expect(c.passed, || {
            format!("{label}: chi2 {:.1} > {:.1} (dof {})", c.statistic, c.critical, c.dof)
        }),
        Err(e) => check.expect(false, || format!("{label}: {e}")),
    }
}

/// Sample mean and its standard error.
fn mean_and_error(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn subset_code(items: &[usize]) -> u64 {
    items.iter().fold(0, |acc, &i| acc | 1 << i)
}

/// 1. Every builder's implied masses equal the input weights.
pub fn implied_masses_exact(seed: u64) -> Report {
    let mut ch = Check::new(1, "implied masses", Some(30));
    let mut rng = RngStream::new(seed, 1);
    let dists = [
        Distribution::Uniform,
        Distribution::PowerLaw { s: 0.5 },
        Distribution::PowerLaw { s: 1.0 },
        Distribution::PowerLaw { s: 2.0 },
    ];
    let mut worst: f64 = 0.0;
    let mut builds = 0;
    for t in 0..200usize {
        let n = match t % 20 {
            18 => 1_000,
            19 => 100_000,
            _ => 1 + rng.below(64),
        };
        let dist = dists[t % dists.len()];
        let wt = table(generate(dist, n, seed ^ (t as u64) << 20));
        let w = wt.weights();
        let mut check = |label: String, m: Vec<f64>| {
            let e = max_relative_error(&m, w);
            worst = worst.max(e);
            builds += 1;
            ch.expect(e <= 1e-9, || format!("{label} n={n} {dist}: rel err {e:.2e}"));
        };
        check("vose".into(), AliasTable::build_vose(&wt).implied_masses());
        check("sweep".into(), AliasTable::build_sweep(&wt).implied_masses());
        for workers in [1, 2, 4, 8] {
            check(
                format!("psa x{workers}"),
                AliasTable::build(&wt, AliasMethod::Psa { workers }).implied_masses(),
            );
        }
        for groups in [1, 4.min(n), n] {
            for base in [LocalBuilder::Vose, LocalBuilder::Sweep] {
                let tl = TwoLevelTable::build(&wt, groups, base, 4).expect("valid group count");
                check(format!("two-level {base:?} g={groups}"), tl.implied_masses());
            }
        }
        let ct = CompressedTable::build(&wt, 4).expect("valid table");
        check("compressed".into(), ct.implied_masses());
    }
    ch.note(format!("{builds} structures, max rel err {worst:.1e}"));
    ch.finish(false)
}

/// 2. Single draws from each structure fit `w_i / W`.
pub fn single_draw_chi_square(seed: u64) -> Report {
    let mut ch = Check::new(2, "single draw chi-square", Some(60));
    let mut rng = RngStream::new(seed, 2);
    let sizes = [2, 3, 4, 5, 7, 10, 16, 25, 50, 64, 100, 128, 200, 300, 500, 700, 1000, 1000, 6, 40];
    let draws = 1_000_000;
    let alpha = ALPHA / (sizes.len() * 3) as f64;
    for (f, &n) in sizes.iter().enumerate() {
        let wt = table(fixture_weights(&mut rng, n, f));
        let groups = ((n as f64).sqrt() as usize).max(1);
        let structures: [(&str, Box<dyn Sampler>); 3] = [
            ("alias", Box::new(AliasTable::build_psa(&wt, 4))),
            (
                "two-level",
                Box::new(TwoLevelTable::build(&wt, groups, LocalBuilder::Sweep, 4).unwrap()),
            ),
            ("compressed", Box::new(CompressedTable::build(&wt, 4).unwrap())),
        ];
        for (name, s) in structures {
            let mut counts = vec![0u64; n];
            for i in s.sample_many(draws, 4, seed ^ ((f as u64) << 8)) {
                counts[i] += 1;
            }
            chi_square_into(&mut ch, &format!("{name} fixture {f} n={n}"), &counts, wt.weights(), alpha);
        }
    }
    ch.note(format!("{} fixtures x 3 structures x {draws} draws, alpha {alpha:.1e}", sizes.len()));
    ch.finish(false)
}

fn multiplicity_code(counts: &[u64]) -> u64 {
    counts.iter().rev().fold(0, |acc, &m| acc << 3 | m)
}

/// 3. Output-sensitive sampling with replacement against the multinomial.
pub fn with_replacement_oracle(seed: u64) -> Report {
    let mut ch = Check::new(3, "with-replacement oracle", Some(120));
    let mut rng = RngStream::new(seed, 3);
    let trials = 1_000_000;
    let paired = trials;
    let fixtures: Vec<(usize, usize)> = (1..=5).flat_map(|n| (1..=5).map(move |k| (n, k))).collect();
    let alpha = ALPHA / fixtures.len() as f64;
    let mut mismatches = 0usize;
    for (f, &(n, k)) in fixtures.iter().enumerate() {
        let w = fixture_weights(&mut rng, n, 2);
        let oracle = enumerate_multinomial(&w, k).expect("within guard");
        let index: HashMap<u64, usize> = oracle
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, o)| (multiplicity_code(o), i))
            .collect();
        let gs = GroupedSampler::build(&table(w), 1).unwrap();
        let mut r = RngStream::new(seed, 300 + f as u64);
        let mut counts = vec![0u64; index.len()];
        let mut m = vec![0u64; n];
        for t in 0..trials {
            let mut twin = r.clone();
            let out = gs.sample_replacement(k as u64, &mut r, true);
            m.iter_mut().for_each(|x| *x = 0);
            for s in &out {
                m[s.item] += s.multiplicity;
            }
            let code = multiplicity_code(&m);
            match index.get(&code) {
                Some(&c) => counts[c] += 1,
                None => ch.expect(false, || format!("n={n} k={k}: impossible outcome {m:?}")),
            }
            if t < paired {
                let plain = gs.sample_replacement(k as u64, &mut twin, false);
                if merge_counts(&plain) != merge_counts(&out) {
                    mismatches += 1;
                }
            }
        }
        if index.len() == 1 {
            ch.expect(counts[0] == trials as u64, || format!("n={n} k={k}: point mass missed"));
        } else {
            chi_square_into(&mut ch, &format!("n={n} k={k}"), &counts, &oracle.probabilities(), alpha);
        }
    }
    ch.expect(mismatches == 0, || format!("{mismatches} deduplicated/plain disagreements"));
    ch.note(format!(
        "{} fixtures x {trials} trials, {paired} paired dedup checks each",
        fixtures.len()
    ));
    ch.finish(false)
}

/// 4. Expected distinct items among `ℓ` draws lies between
/// `(1 - 1/e) t` and `t`; the group estimate is within a factor two of `t`.
pub fn unique_count_bounds(seed: u64) -> Report {
    let mut ch = Check::new(4, "distinct-count bounds", Some(60));
    let mut rng = RngStream::new(seed, 4);
    let n = 64;
    let trials = 100_000u64;
    let mut worst_lo = f64::INFINITY;
    let mut worst_ratio: f64 = 1.0;
    for d in 0..20 {
        let w: Vec<f64> = match d % 4 {
            0 => fixture_weights(&mut rng, n, 0),
            1 => fixture_weights(&mut rng, n, 2),
            2 => generate(Distribution::PowerLaw { s: 1.0 + d as f64 / 10.0 }, n, seed + d as u64),
            _ => (0..n).map(|_| (rng.uniform01() * 30.0).exp2()).collect(),
        };
        let wt = table(w);
        let alias = AliasTable::build_vose(&wt);
        let gs = GroupedSampler::build(&wt, 1).unwrap();
        let mut r = RngStream::new(seed, 400 + d as u64);
        for e in 0..9 {
            let ell = 1u64 << e;
            let t = item_exact_t(wt.weights(), ell as f64);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..trials {
                let mut bits = 0u64;
                for _ in 0..ell {
                    bits |= 1 << alias.sample(&mut r);
                }
                let x = bits.count_ones() as f64;
                sum += x;
                sq += x * x;
            }
            let mean = sum / trials as f64;
            let sd = ((sq / trials as f64 - mean * mean).max(0.0) / trials as f64).sqrt();
            let lo = (1.0 - (-1.0f64).exp()) * t;
            // t is a float sum; allow for its rounding when sd is zero.
            let round = 1e-12 * t;
            let slack = 4.0 * sd + round;
            ch.expect(mean >= lo - slack && mean <= t + slack, || {
                format!("dist {d} ell {ell}: E[X] {mean:.3} outside [{lo:.3}, {t:.3}] +- {:.3}", 4.0 * sd)
            });
            worst_lo = worst_lo.min(mean / t);
            let tg = estimate_t(&gs, ell as f64);
            ch.expect(tg >= t - 1e-9 * t && tg <= 2.0 * t + 1e-9 * t, || {
                format!("dist {d} ell {ell}: group t {tg:.4} vs item t {t:.4}")
            });
            worst_ratio = worst_ratio.max(tg / t);
        }
    }
    ch.note(format!(
        "20 distributions x 9 ell, min E[X]/t {worst_lo:.3}, max group/item t {worst_ratio:.3}"
    ));
    ch.finish(false)
}

fn small_nk_fixtures() -> Vec<(usize, usize)> {
    (1..=6).flat_map(|n| (1..=n.min(3)).map(move |k| (n, k))).collect()
}

/// 5. Sampling without replacement against the sequential oracle.
pub fn without_replacement_oracle(seed: u64) -> Report {
    let mut ch = Check::new(5, "without-replacement oracle", Some(120));
    let mut rng = RngStream::new(seed, 5);
    let trials = 1_000_000;
    let fixtures = small_nk_fixtures();
    let alpha = ALPHA / fixtures.len() as f64;
    let (mut batches, mut rejections) = (0u64, 0u64);
    for (f, &(n, k)) in fixtures.iter().enumerate() {
        let w = fixture_weights(&mut rng, n, 1 + f % 2);
        let oracle = enumerate_wrsn(&w, k).expect("within guard");
        for set in oracle.outcomes() {
            let q = wrsn_set_probability(&w, &set);
            ch.expect((q - oracle.prob(&set)).abs() < 1e-12, || {
                format!("oracles disagree on {set:?}")
            });
        }
        let index: HashMap<u64, usize> = oracle
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, s)| (subset_code(s), i))
            .collect();
        let gs = GroupedSampler::build(&table(w), 1).unwrap();
        let mut r = RngStream::new(seed, 500 + f as u64);
        let mut counts = vec![0u64; index.len()];
        for _ in 0..trials {
            let (set, stats) = sample_no_replacement(&gs, k, &mut r, 1).expect("k <= n");
            batches += stats.batches as u64;
            rejections += stats.rejections as u64;
            match index.get(&subset_code(&set)) {
                Some(&c) if set.len() == k => counts[c] += 1,
                _ => ch.expect(false, || format!("n={n} k={k}: bad output {set:?}")),
            }
        }
        if index.len() == 1 {
            ch.expect(counts[0] == trials as u64, || format!("n={n} k={k}: point mass missed"));
        } else {
            chi_square_into(&mut ch, &format!("n={n} k={k}"), &counts, &oracle.probabilities(), alpha);
        }
    }
    let rate = rejections as f64 / batches.max(1) as f64;
    let bound = 0.5 + 4.0 * (0.25 / batches.max(1) as f64).sqrt();
    ch.expect(rate <= bound, || format!("rejection rate {rate:.4} > {bound:.4}"));
    ch.note(format!(
        "{} fixtures x {trials} trials, rejection rate {rate:.4} over {batches} batches",
        fixtures.len()
    ));
    ch.finish(false)
}

/// 6. Weighted permutations: full-order distribution, slot occupancy and
/// agreement of the slot sort with an exact key sort.
pub fn permutation_checks(seed: u64) -> Report {
    let mut ch = Check::new(6, "permutations", Some(120));
    let mut rng = RngStream::new(seed, 6);
    let trials = 1_000_000;
    let fixtures: Vec<Vec<f64>> = vec![
        vec![2.0, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![5.0, 1.0, 0.25],
        vec![1.0, 2.0, 3.0, 4.0],
        vec![1000.0, 1.0, 1.0, 0.001],
        fixture_weights(&mut rng, 4, 2),
    ];
    let alpha = ALPHA / fixtures.len() as f64;
    for (f, w) in fixtures.iter().enumerate() {
        let n = w.len();
        let oracle = enumerate_permutations(w).expect("within guard");
        let code = |p: &[usize]| p.iter().fold(0u64, |acc, &i| acc * 8 + i as u64);
        let index: HashMap<u64, usize> = oracle
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, p)| (code(p), i))
            .collect();
        let wt = table(w.clone());
        let mut r = RngStream::new(seed, 600 + f as u64);
        let mut counts = vec![0u64; index.len()];
        for _ in 0..trials {
            let p = weighted_permutation(&wt, &mut r, 1);
            let mut seen = 0u64;
            for &i in &p {
                seen |= 1 << i;
            }
            ch.expect(p.len() == n && seen == (1 << n) - 1, || format!("not a permutation: {p:?}"));
            if let Some(&c) = index.get(&code(&p)) {
                counts[c] += 1;
            }
        }
        chi_square_into(&mut ch, &format!("fixture {f} n={n}"), &counts, &oracle.probabilities(), alpha);
    }

    let n = 10_000;
    let audit_trials = 200;
    let limit = (-1.0f64).exp();
    let mut occupancy = Vec::new();
    for (label, w) in [
        ("uniform", fixture_weights(&mut rng, n, 0)),
        ("U=2^30", {
            let mut w: Vec<f64> = (0..n).map(|_| (-30.0 * rng.uniform01()).exp2()).collect();
            w[0] = 1.0;
            w[1] = (-30.0f64).exp2();
            w
        }),
    ] {
        let wt = table(w);
        let audits: Vec<_> = (0..audit_trials)
            .map(|t| bucket_occupancy_audit(&wt, 1, seed ^ (t << 16)))
            .collect();
        let (mean, sd) = mean_and_error(audits.iter().map(|a| a.mean_occupancy));
        ch.expect(mean <= limit + 3.0 * sd, || {
            format!("{label}: occupancy {mean:.4} > 1/e + 3sd")
        });
        let (clamped, csd) = mean_and_error(audits.iter().map(|a| a.mean_clamped));
        ch.expect(clamped <= 2.0 + 4.0 * csd, || {
            format!("{label}: {clamped:.2} items clamped per permutation")
        });
        occupancy.push(format!("{label} {mean:.4} ({clamped:.2} clamped)"));
    }

    let instances = 10_000;
    for inst in 0..instances {
        let n = 1 + rng.below(300);
        let wt = table(fixture_weights(&mut rng, n, inst));
        let keys = exponential_keys(&wt, &RngStream::new(seed, 700_000 + inst as u64), 1);
        let mut exact: Vec<usize> = (0..n).collect();
        exact.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        let got = if n == 1 { vec![0] } else { permutation_from_keys(&wt, &keys, 1).0 };
        ch.expect(got == exact, || format!("instance {inst} n={n}: slot order differs"));
    }
    ch.note(format!(
        "{} orders x {trials} trials; mean occupancy {} (1/e = {limit:.4}); {instances} sort instances",
        fixtures.len(),
        occupancy.join(", ")
    ));
    ch.finish(false)
}

/// 7. Independent inclusion with probability `w_i`.
pub fn subset_checks(seed: u64) -> Report {
    let mut ch = Check::new(7, "subset sampling", Some(60));
    let mut rng = RngStream::new(seed, 7);
    let n = 100;
    let mut w: Vec<f64> = (0..n)
        .map(|i| match i % 5 {
            0 => 1.0 - rng.uniform01(),
            1 => (-12.0 * rng.uniform01()).exp2(),
            2 => 0.5,
            3 => (-3.0 * rng.uniform01()).exp2(),
            _ => 1e-4 * (1.0 - rng.uniform01()),
        })
        .collect();
    w[7] = 1.0;
    let wt = table(w.clone());
    let total = wt.total();
    let pmf = poisson_binomial(&w);
    let pairs: Vec<(usize, usize)> = (0..50)
        .map(|p| (p % n, (p * 37 + 11) % n))
        .map(|(a, b)| if a == b { (a, (b + 1) % n) } else { (a, b) })
        .collect();
    let trials = 200_000u64;
    let alpha = ALPHA / 3.0;
    let sampler = SubsetSampler::build(&wt, 4).unwrap();
    let mut size_means = Vec::new();
    for (wi, workers) in [1usize, 2, 8].into_iter().enumerate() {
        let mut r = RngStream::new(seed, 70 + wi as u64);
        let mut incl = vec![0u64; n];
        let mut joint = vec![0u64; pairs.len()];
        let mut sizes = vec![0u64; n + 1];
        let mut member = vec![false; n];
        for _ in 0..trials {
            let s = sampler.sample(&mut r, workers);
            sizes[s.len()] += 1;
            for &i in &s {
                ch.expect(!member[i], || format!("item {i} repeated"));
                member[i] = true;
                incl[i] += 1;
            }
            for (c, &(a, b)) in pairs.iter().enumerate() {
                if member[a] && member[b] {
                    joint[c] += 1;
                }
            }
            for &i in &s {
                member[i] = false;
            }
        }
        let tf = trials as f64;
        for i in 0..n {
            let p = incl[i] as f64 / tf;
            let sd = (w[i] * (1.0 - w[i]) / tf).sqrt();
            ch.expect((p - w[i]).abs() <= 4.0 * sd, || {
                format!("workers {workers} item {i}: {p:.5} vs {:.5}", w[i])
            });
        }
        let mean_size = sizes.iter().enumerate().map(|(s, &c)| s as f64 * c as f64).sum::<f64>() / tf;
        let var: f64 = w.iter().map(|p| p * (1.0 - p)).sum();
        ch.expect(within_sigma(mean_size, total, (var / tf).sqrt(), 4.0), || {
            format!("workers {workers}: E|S| {mean_size:.4} vs {total:.4}")
        });
        size_means.push(format!("{mean_size:.3}"));
        for (c, &(a, b)) in pairs.iter().enumerate() {
            let pa = incl[a] as f64 / tf;
            let pb = incl[b] as f64 / tf;
            let cov = joint[c] as f64 / tf - pa * pb;
            let sd = (w[a] * (1.0 - w[a]) * w[b] * (1.0 - w[b]) / tf).sqrt();
            ch.expect(cov.abs() <= 4.0 * sd, || {
                format!("workers {workers} pair ({a},{b}): cov {cov:.2e}")
            });
        }
        chi_square_into(&mut ch, &format!("|S| workers {workers}"), &sizes, &pmf, alpha);
    }
    ch.note(format!("n={n}, W={total:.3}, {trials} trials per worker count, E|S| {}", size_means.join("/")));
    ch.finish(false)
}

/// Feeds all `batches` through a fresh reservoir.
fn reservoir_sample(batches: &[MiniBatch], k: usize, pes: usize, seed: u64) -> ReservoirSampler {
    let mut rs = ReservoirSampler::new(k, pes, seed).expect("k, pes >= 1");
    for b in batches {
        rs.process_batch(b, 1).expect("batch matches PE count");
    }
    rs
}

/// 8. Distributed reservoir sampling.
pub fn reservoir_checks(seed: u64) -> Report {
    let mut ch = Check::new(8, "reservoir", Some(180));
    let mut rng = RngStream::new(seed, 8);
    let trials = 1_000_000u64;
    let fixtures = small_nk_fixtures();
    let alpha = ALPHA / (fixtures.len() + 9) as f64;
    let oracle_for = |k: usize, w: &[f64]| {
        let oracle = enumerate_wrsn(w, k).expect("within guard");
        let index: HashMap<u64, usize> = oracle
            .outcomes()
            .iter()
            .enumerate()
            .map(|(i, s)| (subset_code(s), i))
            .collect();
        (oracle, index)
    };
    let tally_run =
        |ch: &mut Check, label: String, w: &[f64], k: usize, pes: usize, per_pe: usize, runs: u64, stream: u64| {
            let (oracle, index) = oracle_for(k, w);
            let batches = MiniBatch::round_robin(w, pes, per_pe);
            let mut counts = vec![0u64; index.len()];
            for t in 0..runs {
                let rs = reservoir_sample(&batches, k, pes, seed ^ stream << 32 ^ t);
                let mut s = rs.sample();
                s.sort_unstable();
                match index.get(&subset_code(&s)) {
                    Some(&c) if s.len() == k => counts[c] += 1,
                    _ => ch.expect(false, || format!("{label}: bad sample {s:?}")),
                }
            }
            if index.len() == 1 {
                ch.expect(counts[0] == runs, || format!("{label}: point mass missed"));
            } else {
                chi_square_into(ch, &label, &counts, &oracle.probabilities(), alpha);
            }
        };
    for (f, &(n, k)) in fixtures.iter().enumerate() {
        let w = fixture_weights(&mut rng, n, 1 + f % 2);
        tally_run(&mut ch, format!("n={n} k={k}"), &w, k, 1, 1, trials, f as u64 + 1);
    }
    let w = fixture_weights(&mut rng, 6, 2);
    let combos = 9;
    for (c, (pes, per_pe)) in [1usize, 2, 4]
        .into_iter()
        .flat_map(|p| [1usize, 2, 5].into_iter().map(move |b| (p, b)))
        .enumerate()
    {
        tally_run(&mut ch, format!("p={pes} b={per_pe}"), &w, 3, pes, per_pe, trials, 100 + c as u64);
    }

    let (n, k, pes) = (100_000usize, 1_000usize, 4usize);
    let weights = fixture_weights(&mut rng, n, 0);
    let batches = MiniBatch::round_robin(&weights, pes, 1);
    let runs = 20;
    let mut per_pe = Vec::new();
    for t in 0..runs {
        let rs = reservoir_sample(&batches, k, pes, seed ^ 0xB00 ^ t << 40);
        per_pe.extend(rs.insertions().into_iter().map(|x| x as f64));
    }
    let (mean, sd) = mean_and_error(per_pe.iter().copied());
    let bound = (k as f64 / pes as f64) * (1.0 + (n as f64 / k as f64).ln());
    ch.expect(mean <= bound + 4.0 * sd, || {
        format!("insertions per PE {mean:.1} > bound {bound:.1} + 4sd")
    });
    ch.note(format!(
        "{} oracle fixtures x {trials}, {combos} (p,b) combos x {trials}, insertions/PE {mean:.1} (bound {bound:.1}, sd {sd:.1})",
        fixtures.len()
    ));
    ch.finish(false)
}

fn best_of<T>(reps: usize, mut f: impl FnMut() -> T) -> (Duration, T) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..reps {
        let start = Instant::now();
        let v = f();
        best = best.min(start.elapsed());
        out = Some(v);
    }
    (best, out.expect("reps >= 1"))
}

/// 9. Speedup of 4 workers over 1 at `n = 10^7`. Soft: only warns.
/// Identical masses across worker counts is still required.
pub fn parallel_scaling(seed: u64) -> Report {
    let mut ch = Check::new(9, "parallel scaling", None);
    let n = 10_000_000;
    let wt = table(generate(Distribution::Uniform, n, seed));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(4).build() {
        Ok(p) => p,
        Err(e) => {
            ch.expect(false, || format!("thread pool: {e}"));
            return ch.finish(true);
        }
    };
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let mut hard = Vec::new();
    pool.install(|| {
        let (t1, a1) = best_of(2, || AliasTable::build_psa(&wt, 1));
        let (t4, a4) = best_of(2, || AliasTable::build_psa(&wt, 4));
        let e = max_relative_error(&a4.implied_masses(), &a1.implied_masses());
        if e > 1e-9 {
            hard.push(format!("psa masses differ across workers: {e:.1e}"));
        }
        let psa = t1.as_secs_f64() / t4.as_secs_f64();
        drop(a1);
        let (s1, _) = best_of(2, || TwoLevelTable::build(&wt, 4, LocalBuilder::Sweep, 1).unwrap());
        let (s4, _) = best_of(2, || TwoLevelTable::build(&wt, 4, LocalBuilder::Sweep, 4).unwrap());
        let two = s1.as_secs_f64() / s4.as_secs_f64();
        let (q1, _) = best_of(2, || a4.sample_many(n, 1, seed));
        let (q4, _) = best_of(2, || a4.sample_many(n, 4, seed));
        let query = q1.as_secs_f64() / q4.as_secs_f64();
        ch.expect(psa >= 1.5, || format!("psa speedup {psa:.2}"));
        ch.expect(two >= 1.5, || format!("two-level speedup {two:.2}"));
        ch.expect(query >= 2.0, || format!("query speedup {query:.2}"));
        ch.note(format!(
            "{cores} core(s); speedups psa {psa:.2}x, two-level sweep {two:.2}x, sample_many {query:.2}x"
        ));
    });
    if !hard.is_empty() {
        let mut r = ch.finish(false);
        r.passed = false;
        r.detail = format!("{}; {}", hard.join("; "), r.detail);
        return r;
    }
    ch.finish(true)
}

/// 10. Output size and query time for power-law weights as `k` grows.
pub fn output_sensitivity(seed: u64) -> Report {
    let mut ch = Check::new(10, "output sensitivity", None);
    let n = 1_000_000;
    let wt = table(generate(Distribution::PowerLaw { s: 2.0 }, n, seed));
    let gs = GroupedSampler::build(&wt, 1).unwrap();
    let ks = [1_000u64, 10_000, 100_000, 1_000_000];
    let mut ratios = Vec::new();
    let mut times = Vec::new();
    for &k in &ks {
        let mut r = RngStream::new(seed, 1000 + k);
        let (t, out) = best_of(5, || gs.sample_replacement(k, &mut r, true));
        ratios.push(out.len() as f64 / k as f64);
        times.push(t.as_secs_f64());
    }
    for i in 1..ks.len() {
        ch.expect(ratios[i] < ratios[i - 1], || {
            format!("s_out/k not decreasing at k={}: {:.4} >= {:.4}", ks[i], ratios[i], ratios[i - 1])
        });
    }
    let growth = times[3] / times[2];
    ch.expect(growth < 10.0, || format!("time grew {growth:.1}x from k=1e5 to 1e6"));

    let small = table(generate(Distribution::PowerLaw { s: 2.0 }, 100_000, seed));
    let gs_small = GroupedSampler::build(&small, 1).unwrap();
    let (out, stats) =
        gs_small.sample_replacement_with(1_000_000, &mut RngStream::new(seed, 10), true, 1);
    let per = stats.visited as f64 / (out.len() as f64 + (100_000f64).log2());
    ch.note(format!(
        "s_out/k {}; time x{growth:.2} for k 1e5->1e6; visited/(s+log n) {per:.2} at n=1e5",
        ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" > ")
    ));
    ch.expect(per < 64.0, || format!("visited/(s + log n) = {per:.1}"));
    ch.finish(false)
}
