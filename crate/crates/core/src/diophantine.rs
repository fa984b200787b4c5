//! Continued fractions and empirical Diophantine constants of the
//! frequency and phase of the quasi-periodic potential.
//!
//! The constants are certified by exhaustive scan over `0 < x <= q_max`;
//! they are operational numbers, not number-theoretic proofs.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{rotation_mod1, Real};

/// Partial quotients above this value are treated as evidence of a
/// rational frequency (beyond double-precision resolution).
pub const RATIONAL_QUOTIENT_LIMIT: u64 = 1_000_000;

/// Default Diophantine exponent.
pub const DEFAULT_TAU: f64 = 1.5;

/// `(sqrt(5) - 1) / 2`.
pub fn golden_mean<T: Real>() -> T {
    (T::c(5.0).sqrt() - T::one()) / T::c(2.0)
}

/// `sqrt(2) - 1`.
pub fn silver_mean<T: Real>() -> T {
    T::c(2.0).sqrt() - T::one()
}

/// Distance from `x` to the nearest integer.
pub fn torus_norm<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::NonFinite("torus_norm"));
    }
    Ok((x - x.round()).abs())
}

/// Partial quotients `[a_1, ..., a_depth]` of `omega = [0; a_1, a_2, ...]`.
///
/// The floating point value is converted exactly to a rational before the
/// Euclidean algorithm runs, so the expansion is exact for the number that
/// is actually stored.
pub fn continued_fraction<T: Real>(omega: T, depth: usize) -> Result<Vec<u64>> {
    if depth == 0 {
        return Err(Error::invalid("depth", "must be at least 1"));
    }
    let mut quotients = Vec::with_capacity(depth);
    let mut expansion = Expansion::new(omega)?;
    while quotients.len() < depth {
        quotients.push(expansion.next_quotient(quotients.len() + 1)?);
    }
    Ok(quotients)
}

/// Exact Euclidean expansion of a floating point number in (0, 1).
struct Expansion {
    num: BigInt,
    den: BigInt,
}

impl Expansion {
    fn new<T: Real>(omega: T) -> Result<Self> {
        let w = omega.to_f64().ok_or(Error::NonFinite("continued_fraction"))?;
        if !w.is_finite() {
            return Err(Error::NonFinite("continued_fraction"));
        }
        if w <= 0.0 || w >= 1.0 {
            return Err(Error::invalid("omega", format!("{w} not in (0, 1)")));
        }
        let r = BigRational::from_float(w).ok_or(Error::NonFinite("continued_fraction"))?;
        Ok(Self { num: r.numer().clone(), den: r.denom().clone() })
    }

    /// Next partial quotient of `num / den` (a number in (0, 1)); errors when
    /// the expansion terminates or the quotient is implausibly large.
    fn next_quotient(&mut self, depth: usize) -> Result<u64> {
        let rational = |q: String| Error::RationalFrequency { depth, quotient: q, limit: RATIONAL_QUOTIENT_LIMIT };
        if self.num.is_zero() {
            return Err(rational("terminated".into()));
        }
        let a = &self.den / &self.num;
        let rem = &self.den - &a * &self.num;
        let a_small = a.to_u64().filter(|&v| v <= RATIONAL_QUOTIENT_LIMIT);
        let Some(a_small) = a_small else {
            return Err(rational(a.to_string()));
        };
        if rem.is_zero() {
            return Err(rational(format!("{a_small} with zero remainder")));
        }
        self.den = std::mem::replace(&mut self.num, rem);
        Ok(a_small)
    }
}

/// A convergent `p / q` of a continued fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convergent {
    pub p: u64,
    pub q: u64,
}

/// Convergents of `[0; a_1, a_2, ...]`, truncated if the denominators
/// overflow `u64`.
pub fn convergents(quotients: &[u64]) -> Vec<Convergent> {
    let mut out = Vec::with_capacity(quotients.len());
    let (mut p_prev, mut q_prev) = (1u64, 0u64);
    let (mut p, mut q) = (0u64, 1u64);
    for &a in quotients {
        let next = a
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .zip(a.checked_mul(q).and_then(|v| v.checked_add(q_prev)));
        let Some((pn, qn)) = next else { break };
        p_prev = p;
        q_prev = q;
        p = pn;
        q = qn;
        out.push(Convergent { p, q });
    }
    out
}

/// Result of a brute-force Diophantine scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineScan<T> {
    /// `min |x|^tau * ||omega x + shift||` over the scanned range.
    pub constant: T,
    /// Smallest `x > 0` realising the minimum.
    pub argmin: i64,
    /// Sign of `2 theta` at the minimum (`+1` for frequency scans).
    pub sign: i8,
    /// Unweighted torus norm at the minimum.
    pub norm_at_min: T,
}

impl<T: Real> DiophantineScan<T> {
    /// The minimiser sits on an exact resonance `omega x = -+2 theta`.
    pub fn is_gap_case(&self) -> bool {
        self.norm_at_min <= T::epsilon() * T::c(4096.0)
    }
}

fn check_scan_inputs<T: Real>(omega: T, tau: T, q_max: u64) -> Result<()> {
    if !omega.is_finite() || !tau.is_finite() {
        return Err(Error::NonFinite("diophantine scan"));
    }
    if q_max == 0 {
        return Err(Error::invalid("q_max", "must be at least 1"));
    }
    if tau < T::zero() {
        return Err(Error::invalid("tau", "must be non-negative"));
    }
    Ok(())
}

const SCAN_CHUNK: u64 = 1 << 14;

/// Ordered min over `1..=q_max`; ties keep the smallest `x` so results do
/// not depend on how the range is split.
fn scan_min<T: Real, F>(q_max: u64, f: F) -> (T, i64, T)
where
    F: Fn(i64) -> (T, T) + Sync,
{
    let n_chunks = q_max.div_ceil(SCAN_CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SCAN_CHUNK + 1;
            let hi = ((c + 1) * SCAN_CHUNK).min(q_max);
            let mut best = (T::infinity(), 0i64, T::zero());
            for x in lo..=hi {
                let (w, n) = f(x as i64);
                if w < best.0 {
                    best = (w, x as i64, n);
                }
            }
            best
        })
        .reduce(
            || (T::infinity(), i64::MAX, T::zero()),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        )
}

/// `min_{0 < |x| <= q_max} |x|^tau ||omega x||`.
pub fn frequency_diophantine_constant<T: Real>(omega: T, tau: T, q_max: u64) -> Result<DiophantineScan<T>> {
    check_scan_inputs(omega, tau, q_max)?;
    let (constant, argmin, norm_at_min) = scan_min(q_max, |x| {
        let n = rotation_mod1(omega, x, T::zero()).abs();
        (T::from_int(x).powf(tau) * n, n)
    });
    Ok(DiophantineScan { constant, argmin, sign: 1, norm_at_min })
}

/// `min_{0 < |x| <= q_max, ±} |x|^tau ||omega x ± 2 theta||`.
pub fn phase_diophantine_constant<T: Real>(omega: T, theta: T, tau: T, q_max: u64) -> Result<DiophantineScan<T>> {
    check_scan_inputs(omega, tau, q_max)?;
    if !theta.is_finite() {
        return Err(Error::NonFinite("phase_diophantine_constant"));
    }
    if theta == T::zero() {
        return Err(Error::invalid("theta", "the phase must be non vanishing"));
    }
    let two_theta = theta + theta;
    let (constant, signed_argmin, norm_at_min) = scan_min(q_max, |x| {
        let w = T::from_int(x).powf(tau);
        let plus = rotation_mod1(omega, x, two_theta).abs();
        let minus = rotation_mod1(omega, x, -two_theta).abs();
        if minus < plus {
            (w * minus, minus)
        } else {
            (w * plus, plus)
        }
    });
    let plus = rotation_mod1(omega, signed_argmin, two_theta).abs();
    let sign = if plus <= norm_at_min { 1 } else { -1 };
    Ok(DiophantineScan { constant, argmin: signed_argmin, sign, norm_at_min })
}

/// Phase constant certified for one particular `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConstant<T> {
    pub theta: T,
    pub c0: T,
    pub argmin: i64,
    pub gap_case: bool,
}

/// An irrational frequency with its continued-fraction data and
/// empirically certified Diophantine constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineFrequency<T> {
    pub omega: T,
    pub partial_quotients: Vec<u64>,
    pub convergents: Vec<Convergent>,
    pub tau: T,
    pub c0_freq: T,
    pub c0_freq_argmin: i64,
    pub c0_phase: Vec<PhaseConstant<T>>,
    pub q_max: u64,
}

impl<T: Real> DiophantineFrequency<T> {
    /// Expands `omega` until the convergent denominators pass `q_max` and
    /// scans the frequency constant.
    pub fn certify(omega: T, tau: T, q_max: u64) -> Result<Self> {
        if tau <= T::one() {
            return Err(Error::invalid("tau", "the Diophantine exponent must exceed 1"));
        }
        let mut expansion = Expansion::new(omega)?;
        let mut partial_quotients = Vec::new();
        loop {
            partial_quotients.push(expansion.next_quotient(partial_quotients.len() + 1)?);
            let conv = convergents(&partial_quotients);
            match conv.last() {
                Some(c) if conv.len() == partial_quotients.len() && c.q <= q_max => continue,
                _ => break,
            }
        }
        let convergents = convergents(&partial_quotients);
        let scan = frequency_diophantine_constant(omega, tau, q_max)?;
        Ok(Self {
            omega,
            partial_quotients,
            convergents,
            tau,
            c0_freq: scan.constant,
            c0_freq_argmin: scan.argmin,
            c0_phase: Vec::new(),
            q_max,
        })
    }

    /// Scans and records the phase constant for `theta`.
    pub fn with_phase(mut self, theta: T) -> Result<Self> {
        let scan = phase_diophantine_constant(self.omega, theta, self.tau, self.q_max)?;
        self.c0_phase.push(PhaseConstant {
            theta,
            c0: scan.constant,
            argmin: scan.argmin,
            gap_case: scan.is_gap_case(),
        });
        Ok(self)
    }

    /// Combined constant `C0` valid for both conditions at every recorded phase.
    pub fn c0(&self) -> T {
        self.c0_phase.iter().fold(self.c0_freq, |acc, p| acc.min(p.c0))
    }
}

/// `|omega - p/q|` evaluated exactly for the stored floating point `omega`.
pub fn convergent_error<T: Real>(omega: T, c: Convergent) -> f64 {
    let w = BigRational::from_float(omega.to_f64_lossy()).unwrap_or_else(BigRational::zero);
    let pq = BigRational::new(BigInt::from(c.p), BigInt::from(c.q));
    (w - pq).abs().to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn torus_norm_examples() {
        assert!((torus_norm(0.3_f64).unwrap() - 0.3).abs() < 1e-15);
        assert!((torus_norm(0.75_f64).unwrap() - 0.25).abs() < 1e-15);
        assert!((torus_norm(-1.2_f64).unwrap() - 0.2).abs() < 1e-15);
        assert!(torus_norm(f64::NAN).is_err());
        assert!(torus_norm(f64::INFINITY).is_err());
    }

    #[test]
    fn golden_and_silver_expansions() {
        assert_eq!(continued_fraction(golden_mean::<f64>(), 5).unwrap(), vec![1, 1, 1, 1, 1]);
        assert_eq!(continued_fraction(silver_mean::<f64>(), 4).unwrap(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn rational_frequency_rejected() {
        let err = continued_fraction(0.5_f64, 3).unwrap_err();
        assert!(matches!(err, Error::RationalFrequency { .. }), "{err}");
        assert!(err.to_string().contains("rational frequency"));
        let err = continued_fraction(0.5_f64, 1).unwrap_err();
        assert!(matches!(err, Error::RationalFrequency { .. }));
        // huge quotient: 1e-7 is beyond the resolution threshold
        assert!(continued_fraction(1e-7_f64, 1).is_err());
    }

    #[test]
    fn convergents_approximate_omega() {
        let omega = golden_mean::<f64>();
        let q = continued_fraction(omega, 30).unwrap();
        for c in convergents(&q) {
            let err = convergent_error(omega, c);
            assert!(err < 1.0 / (c.q as f64).powi(2), "{c:?}: {err}");
        }
    }

    #[test]
    fn single_candidate_scan() {
        let omega = 0.3819_f64;
        let s = frequency_diophantine_constant(omega, 1.0, 1).unwrap();
        assert_eq!(s.argmin, 1);
        assert!((s.constant - torus_norm(omega).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn golden_tau_two_matches_brute_force() {
        let omega = golden_mean::<f64>();
        let s = frequency_diophantine_constant(omega, 2.0, 10_000).unwrap();
        // brute force, independent of the chunked reduction
        let mut best = (f64::INFINITY, 0);
        for x in 1..=10_000i64 {
            let v = (x as f64).powi(2) * torus_norm(omega * x as f64).unwrap();
            if v < best.0 {
                best = (v, x);
            }
        }
        assert_eq!(s.argmin, best.1);
        // x^2 ||omega x|| grows like x / sqrt(5) along the Fibonacci
        // denominators, so the first one wins
        assert_eq!(s.argmin, 1);
        assert!((s.constant - best.0).abs() < 1e-9 * best.0);
    }

    #[test]
    fn phase_gap_case_is_zero() {
        let omega = golden_mean::<f64>();
        let theta = omega * 3.0 / 2.0;
        let s = phase_diophantine_constant(omega, theta, 1.5, 1000).unwrap();
        assert!(s.constant < 1e-12, "{}", s.constant);
        assert_eq!(s.argmin, 3);
        assert!(s.is_gap_case());
    }

    #[test]
    fn phase_constant_positive_and_symmetric() {
        let omega = golden_mean::<f64>();
        let a = phase_diophantine_constant(omega, 0.2377, 1.5, 100_000).unwrap();
        let b = phase_diophantine_constant(omega, -0.2377, 1.5, 100_000).unwrap();
        assert!(a.constant > 0.0 && !a.is_gap_case());
        assert_eq!(a.constant, b.constant);
        assert_eq!(a.argmin, b.argmin);
        assert_eq!(a.sign, -b.sign);
    }

    #[test]
    fn phase_requires_nonzero_theta() {
        assert!(phase_diophantine_constant(0.6_f64, 0.0, 1.5, 10).is_err());
    }

    #[test]
    fn minima_sit_on_convergent_denominators() {
        let omega = silver_mean::<f64>();
        let qs = convergents(&continued_fraction(omega, 12).unwrap());
        for q_max in [10u64, 100, 1000, 10_000] {
            let s = frequency_diophantine_constant(omega, 1.0, q_max).unwrap();
            assert!(qs.iter().any(|c| c.q as i64 == s.argmin), "q_max {q_max}: {}", s.argmin);
        }
    }

    #[test]
    fn certify_collects_convergents_up_to_qmax() {
        let f = DiophantineFrequency::certify(golden_mean::<f64>(), 1.5, 1000)
            .unwrap()
            .with_phase(0.2377)
            .unwrap();
        assert!(f.convergents.iter().any(|c| c.q > 1000));
        assert!(f.c0_freq > 0.0);
        assert_eq!(f.c0_phase.len(), 1);
        assert!(f.c0() <= f.c0_freq);
    }

    #[test]
    fn scan_in_single_precision() {
        let s = frequency_diophantine_constant(golden_mean::<f32>(), 1.0, 100).unwrap();
        assert!(s.constant > 0.38 && s.constant < 0.39);
    }

    proptest! {
        #[test]
        fn frequency_constant_non_increasing(a in 1u64..3000, b in 1u64..3000, w in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s_lo = frequency_diophantine_constant(w, 1.5, lo).unwrap();
            let s_hi = frequency_diophantine_constant(w, 1.5, hi).unwrap();
            prop_assert!(s_hi.constant <= s_lo.constant);
        }

        #[test]
        fn scan_is_a_true_minimum(w in 0.01f64..0.99, q_max in 1u64..500) {
            let s = frequency_diophantine_constant(w, 1.0, q_max).unwrap();
            for x in 1..=q_max as i64 {
                let v = x as f64 * rotation_mod1(w, x, 0.0).abs();
                prop_assert!(v >= s.constant);
            }
        }
    }
}
