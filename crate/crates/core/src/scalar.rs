//! Scalar types usable as edge weights and distortion values.
//!
//! The matching solver and the distortion helpers are written against
//! [`Scalar`] so the same code runs on exact integers, exact rationals and
//! IEEE floats. Integer and rational weights compare exactly; float weights
//! compare with a small relative tolerance when the solver looks for tight
//! (zero reduced cost) edges.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};

/// Numeric type that can carry bigraph edge weights.
pub trait Scalar: Num + Copy + PartialOrd + Debug + FromPrimitive + Send + Sync {
    /// `true` when `self` and `other` are equal for optimality purposes.
    fn approx_eq(self, other: Self) -> bool;
}

macro_rules! exact_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn approx_eq(self, other: Self) -> bool {
                self == other
            }
        }
    )*};
}

macro_rules! float_scalar {
    ($($t:ty => $tol:expr),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn approx_eq(self, other: Self) -> bool {
                let scale = self.abs().max(other.abs()).max(1.0);
                (self - other).abs() <= $tol * scale
            }
        }
    )*};
}

exact_scalar!(i32, i64, i128, Ratio<i64>, Ratio<i128>);
float_scalar!(f32 => 1e-4, f64 => 1e-9);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_types_compare_exactly() {
        assert!(3i64.approx_eq(3));
        assert!(!3i64.approx_eq(4));
        assert!(Ratio::new(1i64, 2).approx_eq(Ratio::new(2, 4)));
    }

    #[test]
    fn floats_tolerate_rounding() {
        assert!((0.1f64 + 0.2).approx_eq(0.3));
        assert!(!1.0f64.approx_eq(1.001));
        assert!(1e12f64.approx_eq(1e12 + 1e-3));
    }
}
