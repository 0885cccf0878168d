//! Natural-log probabilities.

use std::fmt;
use std::ops::{Add, AddAssign};

/// A probability stored on the natural-log scale.
///
/// `LogProb(0.0)` is probability one, negative values are probabilities in
/// `(0, 1)`, and negative infinity encodes exactly probability zero. Values
/// derived from a stochastic model are never positive.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
#[repr(transparent)]
pub struct LogProb(pub f64);

impl LogProb {
    /// Log of probability zero.
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    /// Log of probability one.
    pub const ONE: LogProb = LogProb(0.0);

    /// Converts a linear-space probability. Zero maps to negative infinity.
    pub fn from_prob(p: f64) -> LogProb {
        if p == 0.0 {
            LogProb::ZERO
        } else {
            LogProb(p.ln())
        }
    }

    /// Back to linear space.
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True exactly when this encodes probability zero.
    pub fn is_zero_prob(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Add for LogProb {
    type Output = LogProb;
    /// Multiplication of the underlying probabilities.
    fn add(self, rhs: LogProb) -> LogProb {
        LogProb(self.0 + rhs.0)
    }
}

impl AddAssign for LogProb {
    fn add_assign(&mut self, rhs: LogProb) {
        self.0 += rhs.0;
    }
}

impl fmt::Debug for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ln({:?})", self.0)
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_round_trip() {
        assert!(LogProb::from_prob(0.0).is_zero_prob());
        assert_eq!(LogProb::from_prob(0.0).prob(), 0.0);
        assert_eq!(LogProb::from_prob(1.0).value(), 0.0);
    }

    #[test]
    fn add_is_product() {
        let half = LogProb::from_prob(0.5);
        let quarter = half + half;
        assert!((quarter.prob() - 0.25).abs() < 1e-15);
        assert!((half + LogProb::ZERO).is_zero_prob());
    }
}
