//! Sums kept as an unevaluated pair `hi + lo` (double-double), for the long
//! running differences in table construction.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    pub const INFINITY: Compensated = Compensated {
        hi: f64::INFINITY,
        lo: 0.0,
    };

    pub fn new(x: f64) -> Self {
        Compensated { hi: x, lo: 0.0 }
    }

    /// Exact product `a * b`.
    pub fn product(a: f64, b: f64) -> Self {
        let hi = a * b;
        Compensated {
            hi,
            lo: a.mul_add(b, -hi),
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    /// Sign of `self - other`, exact up to the pair's precision.
    pub fn cmp_to(self, other: Compensated) -> Ordering {
        (self - other).value().total_cmp(&0.0)
    }
}

impl Add for Compensated {
    type Output = Compensated;

    #[inline]
    fn add(self, o: Compensated) -> Compensated {
        if !self.hi.is_finite() || !o.hi.is_finite() {
            return Compensated::new(self.hi + o.hi);
        }
        let (s, e) = two_sum(self.hi, o.hi);
        let (hi, lo) = fast_two_sum(s, e + self.lo + o.lo);
        Compensated { hi, lo }
    }
}

impl Add<f64> for Compensated {
    type Output = Compensated;

    #[inline]
    fn add(self, x: f64) -> Compensated {
        self + Compensated::new(x)
    }
}

impl Sub for Compensated {
    type Output = Compensated;

    #[inline]
    fn sub(self, o: Compensated) -> Compensated {
        self + Compensated {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Sub<f64> for Compensated {
    type Output = Compensated;

    #[inline]
    fn sub(self, x: f64) -> Compensated {
        self + Compensated::new(-x)
    }
}
