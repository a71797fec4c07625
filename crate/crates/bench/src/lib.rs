//! Shared inputs for the criterion benches.

use wrs::{Distribution, WeightTable};

pub const SEED: u64 = 0xC0FFEE;

/// Sizes and distributions the benches sweep over.
pub const SIZES: [usize; 3] = [1_000, 100_000, 1_000_000];

pub fn distributions() -> [Distribution; 3] {
    [
        Distribution::Uniform,
        Distribution::PowerLaw { s: 1.0 },
        Distribution::PowerLaw { s: 2.0 },
    ]
}

pub fn table(dist: Distribution, n: usize) -> WeightTable {
    WeightTable::new(wrs::inputs::generate(dist, n, SEED)).expect("generated weights are valid")
}

/// Worker counts up to the machine's parallelism, doubling.
pub fn worker_counts() -> Vec<usize> {
    let max = std::thread::available_parallelism().map_or(1, |p| p.get());
    let mut v = vec![1];
    while v.last().unwrap() * 2 <= max {
        v.push(v.last().unwrap() * 2);
    }
    v
}

/// `name/dist` label for a benchmark group.
pub fn label(name: &str, dist: Distribution) -> String {
    match dist {
        Distribution::Uniform => format!("{name}/uniform"),
        Distribution::PowerLaw { s } => format!("{name}/powerlaw-{s}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        let t = table(Distribution::PowerLaw { s: 1.0 }, 10);
        assert_eq!(t.len(), 10);
        assert_eq!(worker_counts()[0], 1);
        assert_eq!(label("psa", Distribution::PowerLaw { s: 2.0 }), "psa/powerlaw-2");
    }
}
