//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar (`f32` or `f64`).
///
/// All operators, solvers and simulators are generic over this trait. Methods
/// such as `sqrt`, `abs` and `max` come from [`RealField`]; numeric literals go
/// through [`Real::lit`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default
{
    /// Machine epsilon.
    const EPS: Self;

    /// Relative factor in the numerical-rank rule `tau = max(m, n) * sigma_max * factor`.
    ///
    /// `1e-12` for `f64`; for `f32` the same number of ulps (about 4500 eps).
    const RANK_RTOL: Self;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;
    const RANK_RTOL: Self = 1e-12;
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;
    const RANK_RTOL: Self = 5.0e-4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert!(!f64::infinity().is_finite_value());
        assert!(2.0f32.is_finite_value());
    }

    #[test]
    fn f32_rank_factor_is_comparable_in_ulps() {
        let f64_ulps = f64::RANK_RTOL / f64::EPS;
        let f32_ulps = f32::RANK_RTOL / f32::EPS;
        assert!((f64_ulps - f32_ulps as f64).abs() / f64_ulps < 0.1);
    }
}
