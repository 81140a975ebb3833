//! Extended real line `[-inf, +inf]` with checked addition.
//!
//! Values are plain `f64` with the two infinities allowed and NaN rejected at
//! construction. Addition of opposite infinities has no meaningful value in
//! any of the places this type is used, so it panics instead of producing NaN.

use std::fmt;
use std::ops::{Add, AddAssign, Neg};

#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedReal(f64);

pub const POS_INF: ExtendedReal = ExtendedReal(f64::INFINITY);
pub const NEG_INF: ExtendedReal = ExtendedReal(f64::NEG_INFINITY);
pub const ZERO: ExtendedReal = ExtendedReal(0.0);

impl ExtendedReal {
    /// Wraps a value; `v` may be infinite but not NaN.
    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "extended real cannot hold NaN");
        ExtendedReal(v)
    }

    /// Wraps a value that must be finite.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "expected a finite value, got {v}");
        ExtendedReal(v)
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// Underlying `f64`, infinities included.
    pub fn value(self) -> f64 {
        self.0
    }

    /// Scales by a strictly positive finite factor; sign and infiniteness are
    /// preserved, so no indeterminate product can arise.
    pub fn scale_pos(self, c: f64) -> Self {
        debug_assert!(c > 0.0 && c.is_finite());
        ExtendedReal(self.0 * c)
    }

    pub fn min(self, other: Self) -> Self {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::new(v)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        let sum = self.0 + rhs.0;
        // Opposite infinities are the only way two non-NaN operands sum to NaN.
        assert!(
            !sum.is_nan(),
            "indeterminate sum (+inf) + (-inf) of extended reals"
        );
        ExtendedReal(sum)
    }
}

impl AddAssign for ExtendedReal {
    fn add_assign(&mut self, rhs: ExtendedReal) {
        *self = *self + rhs;
    }
}

impl Neg for ExtendedReal {
    type Output = ExtendedReal;

    fn neg(self) -> ExtendedReal {
        ExtendedReal(-self.0)
    }
}

impl fmt::Debug for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_sums() {
        assert_eq!(POS_INF + ExtendedReal::finite(-3.0), POS_INF);
        assert_eq!(NEG_INF + ExtendedReal::finite(1e300), NEG_INF);
        assert_eq!(POS_INF + POS_INF, POS_INF);
        assert_eq!(
            ExtendedReal::finite(2.0) + ExtendedReal::finite(0.5),
            ExtendedReal::finite(2.5)
        );
    }

    #[test]
    #[should_panic(expected = "indeterminate sum")]
    fn opposite_infinities_panic() {
        let _ = POS_INF + NEG_INF;
    }

    #[test]
    #[should_panic(expected = "NaN")]
    fn nan_rejected() {
        let _ = ExtendedReal::new(f64::NAN);
    }

    #[test]
    fn ordering_is_total_on_non_nan() {
        assert!(NEG_INF < ExtendedReal::finite(-1e308));
        assert!(ExtendedReal::finite(0.0) < POS_INF);
        assert!(NEG_INF < POS_INF);
        assert_eq!(POS_INF.min(ExtendedReal::finite(1.0)).value(), 1.0);
        assert_eq!(NEG_INF.max(ExtendedReal::finite(1.0)).value(), 1.0);
    }

    #[test]
    fn scaling_preserves_infinities() {
        assert_eq!(POS_INF.scale_pos(0.5), POS_INF);
        assert_eq!(NEG_INF.scale_pos(2.0), NEG_INF);
        assert_eq!(ExtendedReal::finite(-4.0).scale_pos(0.25).value(), -1.0);
    }
}
