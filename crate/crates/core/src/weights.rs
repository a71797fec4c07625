//! Validated input weights with cached aggregates.

use crate::error::{Error, Result};

/// Largest item count the table layouts support (item ids are stored as `u32`).
pub const MAX_ITEMS: usize = u32::MAX as usize;

/// Pairwise (cascade) summation. Error grows with `O(log n)` ulps instead of
/// `O(n)` for a left fold.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BASE: usize = 128;
    if values.len() <= BASE {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// A non-empty sequence of strictly positive, finite weights.
#[derive(Debug, Clone)]
pub struct WeightTable {
    weights: Vec<f64>,
    total: f64,
    min: f64,
    max: f64,
}

impl WeightTable {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty);
        }
        if weights.len() > MAX_ITEMS {
            return Err(Error::TooManyItems {
                n: weights.len(),
                max: MAX_ITEMS,
            });
        }
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidWeight { index, value });
            }
            min = min.min(value);
            max = max.max(value);
        }
        let total = pairwise_sum(&weights);
        if !total.is_finite() {
            return Err(Error::InvalidArgument(
                "total weight overflows f64".to_string(),
            ));
        }
        Ok(WeightTable {
            weights,
            total,
            min,
            max,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total weight `W`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// `U = w_max / w_min`.
    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }

    /// `u = ceil(log2 U)`.
    pub fn log_ratio(&self) -> u32 {
        self.ratio().log2().ceil().max(0.0) as u32
    }

    /// Per-bucket capacity `W / n` of an `n`-bucket table.
    pub fn bucket_weight(&self) -> f64 {
        self.total / self.len() as f64
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }
}
