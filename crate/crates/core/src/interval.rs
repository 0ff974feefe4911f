use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Input(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    /// Interval spanned by two points in either order.
    pub fn hull(a: f64, b: f64) -> Self {
        Interval { lo: a.min(b), hi: a.max(b) }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_open(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// `self ⊆ other` up to an absolute slack.
    pub fn within(&self, other: &Interval, slack: f64) -> bool {
        self.lo >= other.lo - slack && self.hi <= other.hi + slack
    }

    /// True when the interiors overlap by more than `slack`.
    pub fn overlaps(&self, other: &Interval, slack: f64) -> bool {
        self.lo.max(other.lo) < self.hi.min(other.hi) - slack
    }

    /// The affine orientation-preserving map `[0,1] → self`.
    ///
    /// Written so that `at(0) == lo` and `at(1) == hi` exactly.
    pub fn at(&self, t: f64) -> f64 {
        (1.0 - t) * self.lo + t * self.hi
    }

    /// Inverse of [`Interval::at`].
    pub fn coordinate(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo)
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:.12e}, {:.12e}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_endpoints_are_exact() {
        let i = Interval::new(0.1, 0.7).unwrap();
        assert_eq!(i.at(0.0), 0.1);
        assert_eq!(i.at(1.0), 0.7);
        assert!((i.coordinate(i.at(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_reversed() {
        assert!(Interval::new(0.5, 0.2).is_err());
        assert!(Interval::new(f64::NAN, 0.2).is_err());
    }
}
