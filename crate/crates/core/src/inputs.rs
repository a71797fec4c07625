//! Synthetic weight generators.

use crate::rng::RngStream;
use rand::seq::SliceRandom;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution {
    /// Independent uniform weights in `(0, 1]`.
    Uniform,
    /// A random permutation of `1^-s, 2^-s, ..., n^-s`.
    PowerLaw { s: f64 },
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::PowerLaw { .. } => "powerlaw",
        }
    }

    pub fn skew(&self) -> f64 {
        match *self {
            Distribution::Uniform => 0.0,
            Distribution::PowerLaw { s } => s,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Uniform => write!(f, "uniform"),
            Distribution::PowerLaw { s } => write!(f, "powerlaw(s={s})"),
        }
    }
}

impl FromStr for Distribution {
    type Err = String;

    /// Parses `uniform`, `powerlaw` (s = 1) or `powerlaw:<s>`.
    fn from_str(text: &str) -> Result<Self, String> {
        match text.split_once(':') {
            None if text == "uniform" => Ok(Distribution::Uniform),
            None if text == "powerlaw" => Ok(Distribution::PowerLaw { s: 1.0 }),
            Some(("powerlaw", s)) => s
                .parse::<f64>()
                .map(|s| Distribution::PowerLaw { s })
                .map_err(|e| format!("bad skew {s:?}: {e}")),
            _ => Err(format!("unknown distribution {text:?}")),
        }
    }
}

/// `n` weights from `dist`, reproducible from `seed`.
pub fn generate(dist: Distribution, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 0x6765_6e);
    match dist {
        Distribution::Uniform => (0..n).map(|_| 1.0 - rng.uniform01()).collect(),
        Distribution::PowerLaw { s } => {
            let mut w: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-s)).collect();
            w.shuffle(&mut rng);
            w
        }
    }
}
