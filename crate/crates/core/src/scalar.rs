//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a site index or count.
    #[inline]
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance floor below which a requested relative accuracy is meaningless.
    #[inline]
    fn accuracy_floor() -> Self {
        Self::epsilon() * Self::c(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x` modulo one, centred into `(-1/2, 1/2]`.
#[inline]
pub fn centered_mod1<T: Real>(x: T) -> T {
    let r = x - x.round();
    // round() sends exact halves away from zero; fold -1/2 onto +1/2
    if r <= -T::c(0.5) {
        r + T::one()
    } else {
        r
    }
}

/// Centred fractional part of `omega * n + shift`, with the product formed
/// without rounding loss so that large `n` keeps full relative accuracy.
#[inline]
pub fn rotation_mod1<T: Real>(omega: T, n: i64, shift: T) -> T {
    let nf = T::from_int(n);
    let hi = omega * nf;
    let lo = omega.mul_add(nf, -hi);
    let base = hi - hi.round();
    centered_mod1(base + lo + centered_mod1(shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_range() {
        assert_eq!(centered_mod1(0.75_f64), -0.25);
        assert_eq!(centered_mod1(-0.5_f64), 0.5);
        assert_eq!(centered_mod1(0.5_f64), 0.5);
        assert!((centered_mod1(-1.2_f64) - (-0.2)).abs() < 1e-15);
    }

    #[test]
    fn rotation_matches_naive_for_small_n() {
        let omega = 0.618_033_988_749_894_9_f64;
        for n in -50..50 {
            let naive = centered_mod1(omega * n as f64 + 0.3);
            let exact = rotation_mod1(omega, n, 0.3);
            let d = centered_mod1(naive - exact).abs();
            assert!(d < 1e-13, "n={n}: {naive} vs {exact}");
        }
    }

    #[test]
    fn rotation_keeps_precision_at_large_n() {
        // F_40 = 102334155: ||omega F_40|| is ~4e-9 and must not drown in
        // the ~1e-8 rounding error of the naive product.
        let omega = 0.618_033_988_749_894_9_f64;
        let q = 102_334_155_i64;
        let s = rotation_mod1(omega, q, 0.0).abs();
        assert!(s > 1e-10 && s < 1e-8, "{s}");
    }
}
