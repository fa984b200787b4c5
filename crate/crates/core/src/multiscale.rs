//! Infrared scale decomposition around the two Fermi points
//! `x̄₊ = x̂` and `x̄₋ = −x̂ − 2θ/ω`, single-scale propagators at zero
//! temperature, and chain products of bare resolvents.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::{continued_fraction, convergents};
use crate::error::{Error, Result};
use crate::model::{smooth_step, ModelParams};
use crate::quadrature::integrate;
use crate::scalar::{rotation_mod1, Real};

/// Which Fermi point a momentum is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }

    /// Lattice site labelled by the integer offset `n` on this branch:
    /// `x = n + ρ x̂`.
    pub fn site(self, n: i64, x_hat: i64) -> i64 {
        match self {
            Branch::Plus => n + x_hat,
            Branch::Minus => n - x_hat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DenominatorMode {
    #[default]
    Exact,
    /// First-order expansion in the torus offset.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleLabel {
    Ultraviolet,
    Scale(i32),
    BelowHmin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFamily<T> {
    pub gamma: T,
    pub a: T,
    pub v0: T,
    pub h_min: i32,
    pub tau: T,
    pub omega: T,
    pub theta: T,
    pub x_hat: i64,
    pub disorder: T,
    /// `x̄₋ = −x̂ − 2θ/ω`; informational, all arithmetic uses offsets.
    pub x_bar_minus: T,
}

pub const DEFAULT_H_MIN: i32 = -10;

impl<T: Real> ScaleFamily<T> {
    /// Default family: `γ = 2^{2τ}`, `h_min = −10`, and `a` at half the
    /// largest value that keeps the two infrared supports apart.
    pub fn new(params: &ModelParams<T>) -> Result<Self> {
        params.validate()?;
        let mut f = Self {
            gamma: T::c(2.0).powf(T::c(2.0) * params.tau),
            a: T::zero(),
            v0: params.v0(),
            h_min: DEFAULT_H_MIN,
            tau: params.tau,
            omega: params.omega,
            theta: params.theta,
            x_hat: params.x_hat,
            disorder: params.disorder,
            x_bar_minus: -T::from_int(params.x_hat) - T::c(2.0) * params.theta / params.omega,
        };
        f.a = f.support_bound() / T::c(2.0);
        f.validate()?;
        Ok(f)
    }

    pub fn with_gamma(mut self, gamma: T) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_a(mut self, a: T) -> Result<Self> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_h_min(mut self, h_min: i32) -> Result<Self> {
        self.h_min = h_min;
        self.validate()?;
        Ok(self)
    }

    /// `|v0| ‖ω(x̄₊ − x̄₋)‖ / 2`; the scale-0 supports overlap once `a`
    /// reaches it.
    pub fn support_bound(&self) -> T {
        let sep = rotation_mod1(self.omega, 2 * self.x_hat, T::c(2.0) * self.theta).abs();
        self.v0.abs() * sep / T::c(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > T::one()) {
            return Err(Error::invalid("gamma", "must exceed 1"));
        }
        if self.gamma.powf(self.tau.recip()) / T::c(2.0) <= T::one() {
            return Err(Error::invalid("gamma", "gamma^(1/tau) must exceed 2"));
        }
        if self.h_min >= 0 {
            return Err(Error::invalid("h_min", "must be negative"));
        }
        if !(self.a > T::zero() && self.a.is_finite()) {
            return Err(Error::invalid("a", "must be positive"));
        }
        let bound = self.support_bound();
        if self.a >= bound {
            return Err(Error::SupportOverlap { a: self.a.to_f64_lossy(), bound: bound.to_f64_lossy() });
        }
        Ok(())
    }

    /// Signed torus offset `(ω(x − x̄_ρ)) mod 1` in `(−½, ½]`.
    pub fn offset_of_site(&self, branch: Branch, x: i64) -> T {
        match branch {
            Branch::Plus => rotation_mod1(self.omega, x - self.x_hat, T::zero()),
            Branch::Minus => rotation_mod1(self.omega, x + self.x_hat, T::c(2.0) * self.theta),
        }
    }

    /// Offset for the integer label `n` of [`Branch::site`].
    pub fn offset(&self, branch: Branch, n: i64) -> T {
        self.offset_of_site(branch, branch.site(n, self.x_hat))
    }

    pub fn radius(&self, t: T, k0: T) -> T {
        k0.hypot(self.v0 * t)
    }

    pub fn chi_h(&self, t: T, k0: T, h: i32) -> T {
        let inner = self.a * self.gamma.powi(h - 1);
        smooth_step(self.radius(t, k0) / inner, self.gamma)
    }

    pub fn f_h(&self, t: T, k0: T, h: i32) -> T {
        self.chi_h(t, k0, h) - self.chi_h(t, k0, h - 1)
    }

    /// `χ^{(1)} = 1 − χ₀(+) − χ₀(−)` at lattice site `x`.
    pub fn chi_ultraviolet(&self, x: i64, k0: T) -> T {
        T::one() - self.chi_h(self.offset_of_site(Branch::Plus, x), k0, 0) - self.chi_h(self.offset_of_site(Branch::Minus, x), k0, 0)
    }

    /// Scale carrying `(x, k0)`: the `h` with `aγ^{h−1} ≤ r < aγ^h` for the
    /// nearer Fermi point.
    pub fn scale_of(&self, x: i64, k0: T) -> ScaleLabel {
        let r = self
            .radius(self.offset_of_site(Branch::Plus, x), k0)
            .min(self.radius(self.offset_of_site(Branch::Minus, x), k0));
        if r >= self.a {
            return ScaleLabel::Ultraviolet;
        }
        if r == T::zero() {
            return ScaleLabel::BelowHmin;
        }
        let mut h = ((r / self.a).ln() / self.gamma.ln()).floor().to_i64().unwrap_or(i64::MIN / 2) + 1;
        // guard the floor against rounding at exact powers of gamma
        let pow = |h: i64| self.a * self.gamma.powi((h - 1).clamp(i32::MIN as i64 / 2, 0) as i32);
        while h < 0 && r >= self.a * self.gamma.powi(h as i32) {
            h += 1;
        }
        while r < pow(h) && h > i32::MIN as i64 / 2 {
            h -= 1;
        }
        if h < self.h_min as i64 {
            ScaleLabel::BelowHmin
        } else {
            ScaleLabel::Scale(h.min(0) as i32)
        }
    }

    /// `φ_x − μ₀` written through the torus offset `s` of `x` from `x̄_ρ`.
    pub fn denominator(&self, branch: Branch, s: T, mode: DenominatorMode) -> T {
        let rho: T = branch.sign();
        let pi = T::PI();
        match mode {
            DenominatorMode::Exact => {
                let phase = T::TAU() * rotation_mod1(self.omega, self.x_hat, self.theta);
                -T::c(2.0) * self.disorder * (phase + pi * rho * s).sin() * (pi * rho * s).sin()
            }
            DenominatorMode::Linearized => -T::c(2.0) * pi * rho * self.disorder * self.v0 * s,
        }
    }
}

/// Worst deviation of `χ^{(1)} + χ₀(+) + χ₀(−)` from one over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport<T> {
    pub max_residual: T,
    pub points: usize,
}

pub fn partition_of_unity_check<T: Real>(family: &ScaleFamily<T>, sites: &[i64], k0s: &[T]) -> Result<PartitionReport<T>> {
    family.validate()?;
    let mut worst = T::zero();
    for &x in sites {
        for &k0 in k0s {
            let plus = family.chi_h(family.offset_of_site(Branch::Plus, x), k0, 0);
            let minus = family.chi_h(family.offset_of_site(Branch::Minus, x), k0, 0);
            if plus > T::zero() && minus > T::zero() {
                return Err(Error::SupportOverlap {
                    a: family.a.to_f64_lossy(),
                    bound: family.support_bound().to_f64_lossy(),
                });
            }
            let res = (family.chi_ultraviolet(x, k0) + plus + minus - T::one()).abs();
            worst = worst.max(res);
        }
    }
    Ok(PartitionReport { max_residual: worst, points: sites.len() * k0s.len() })
}

/// `max |Σ_{h*<h≤0} f_h − (χ₀ − χ_{h*})|` over the `(t, k0)` samples.
pub fn telescoping_residual<T: Real>(family: &ScaleFamily<T>, samples: &[(T, T)], h_star: i32) -> T {
    samples
        .iter()
        .map(|&(t, k0)| {
            let sum: T = (h_star + 1..=0).map(|h| family.f_h(t, k0, h)).sum();
            (sum - (family.chi_h(t, k0, 0) - family.chi_h(t, k0, h_star))).abs()
        })
        .fold(T::zero(), T::max)
}

/// `(1/2π) ∫ dk0 e^{−ik0 t} w(k0) / (−ik0 + D)` for an even weight `w`
/// supported on `lo ≤ |k0| ≤ hi`, split at `mid` for the quadrature.
fn filtered_transform<T: Real>(w: impl Fn(T) -> T, d: T, t: T, lo: T, mid: T, hi: T) -> Result<T> {
    let integrand = |k0: T| w(k0) * (d * (k0 * t).cos() + k0 * (k0 * t).sin()) / (d * d + k0 * k0);
    let rel = T::c(1e-8);
    let scale = (hi - lo) / d.abs().max(lo).max(hi * T::c(1e-3));
    let abs = T::c(1e-11) * scale;
    let mut total = T::zero();
    for (a, b) in [(lo, mid), (mid, hi)] {
        if b > a {
            total += integrate(integrand, a, b, abs, rel)?;
        }
    }
    Ok(total / T::PI())
}

/// Frequency window where the annulus `r_in ≤ √(k0² + v0² s²) ≤ r_out` lives.
fn k0_window<T: Real>(family: &ScaleFamily<T>, s: T, r: T) -> T {
    let vs = family.v0 * s;
    if r <= vs.abs() {
        T::zero()
    } else {
        (r * r - vs * vs).sqrt()
    }
}

/// Scale-`h` propagator at the site with label `n` on `branch`, at time `t`
/// and zero temperature.
pub fn single_scale_propagator<T: Real>(
    family: &ScaleFamily<T>,
    branch: Branch,
    n: i64,
    t: T,
    h: i32,
    mode: DenominatorMode,
) -> Result<T> {
    if h > 0 {
        return Err(Error::invalid("h", "scales are non-positive"));
    }
    let s = family.offset(branch, n);
    let g = family.gamma;
    let (r_lo, r_mid, r_hi) = (family.a * g.powi(h - 2), family.a * g.powi(h - 1), family.a * g.powi(h));
    if (family.v0 * s).abs() >= r_hi {
        return Ok(T::zero());
    }
    let d = family.denominator(branch, s, mode);
    let (lo, mid, hi) = (k0_window(family, s, r_lo), k0_window(family, s, r_mid), k0_window(family, s, r_hi));
    filtered_transform(|k0| family.f_h(s, k0, h), d, t, lo, mid, hi)
}

/// Propagator filtered by `χ₀ − χ_{h*}`, the telescoped sum of scales
/// `h* < h ≤ 0`.
pub fn filtered_propagator<T: Real>(
    family: &ScaleFamily<T>,
    branch: Branch,
    n: i64,
    t: T,
    h_star: i32,
    mode: DenominatorMode,
) -> Result<T> {
    let s = family.offset(branch, n);
    let g = family.gamma;
    let d = family.denominator(branch, s, mode);
    let mut total = T::zero();
    // χ_{h*} drops below one at r = aγ^{h*−2}; integrate annulus by annulus
    for h in h_star - 1..=0 {
        let (r_lo, r_hi) = (family.a * g.powi(h - 1), family.a * g.powi(h));
        if (family.v0 * s).abs() >= r_hi {
            continue;
        }
        let (lo, hi) = (k0_window(family, s, r_lo), k0_window(family, s, r_hi));
        let w = |k0: T| family.chi_h(s, k0, 0) - family.chi_h(s, k0, h_star);
        total += filtered_transform(w, d, t, lo, lo, hi)?;
    }
    Ok(total)
}

/// Offsets `n` whose torus offset `‖ωn‖` is exceptionally small: zero, the
/// convergent denominators `q_k` and the intermediate `q_k ± q_{k−1}`, both
/// signs, up to `max_q`.
pub fn convergent_offsets<T: Real>(omega: T, max_q: u64) -> Vec<i64> {
    // the deepest expansion the stored value admits
    let quotients = (1..=64).rev().find_map(|d| continued_fraction(omega, d).ok()).unwrap_or_default();
    let conv = convergents(&quotients);
    let mut ns = vec![0i64];
    for w in conv.windows(2) {
        let (q0, q1) = (w[0].q, w[1].q);
        if q1 + q0 > max_q {
            break;
        }
        for q in [q1, q1 + q0, q1 - q0] {
            ns.extend([q as i64, -(q as i64)]);
        }
    }
    ns.sort_unstable();
    ns.dedup();
    ns
}

/// Sup statistics of one scale over sampled offsets and times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDecay<T> {
    pub h: i32,
    /// `sup |g^{(h)}|`.
    pub sup_g: T,
    /// `sup |g^{(h)}| (1 + (γ^h |t|)^N)` for `N = 1, 2, 3`.
    pub c_n: [T; 3],
    /// Offsets whose momentum lies in the scale-`h` support.
    pub offsets_in_support: usize,
}

/// Evaluate `g^{(h)}` at `t = k / (4 a γ^h)`, `k = 0..=4·t_units`, for every
/// offset in the support and every `h` in `hs`.
pub fn decay_profile<T: Real>(
    family: &ScaleFamily<T>,
    branch: Branch,
    hs: &[i32],
    offsets: &[i64],
    t_units: usize,
    mode: DenominatorMode,
) -> Result<Vec<ScaleDecay<T>>> {
    hs.par_iter()
        .map(|&h| {
            let unit = family.gamma.powi(-h) / family.a;
            let mut out = ScaleDecay { h, sup_g: T::zero(), c_n: [T::zero(); 3], offsets_in_support: 0 };
            for &n in offsets {
                if (family.v0 * family.offset(branch, n)).abs() >= family.a * family.gamma.powi(h) {
                    continue;
                }
                out.offsets_in_support += 1;
                for k in 0..=4 * t_units {
                    let t = unit * T::from_usize(k).unwrap() / T::c(4.0);
                    let g = single_scale_propagator(family, branch, n, t, h, mode)?.abs();
                    let scaled = family.gamma.powi(h) * t;
                    out.sup_g = out.sup_g.max(g);
                    for (p, c) in out.c_n.iter_mut().enumerate() {
                        *c = c.max(g * (T::one() + scaled.powi(p as i32 + 1)));
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// A product of bare resolvents along a path of nearest-neighbour steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGraph<T> {
    pub value: Complex<T>,
    /// Visited sites `x1 + α1`, `x1 + α1 + α2`, ...
    pub sites: Vec<i64>,
    /// `|−ik0 + φ_x − μ|` at each visited site.
    pub divisors: Vec<T>,
}

pub fn chain_graph_value<T: Real>(params: &ModelParams<T>, alphas: &[i8], x1: i64, k0: T) -> Result<ChainGraph<T>> {
    params.offset(x1)?;
    let mu = params.mu();
    let mut x = x1;
    let mut value = Complex::new(T::one(), T::zero());
    let mut sites = Vec::with_capacity(alphas.len());
    let mut divisors = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(-1..=1).contains(&alpha) {
            return Err(Error::invalid("alphas", "steps must be -1, 0 or +1"));
        }
        x += alpha as i64;
        params.offset(x)?;
        let d = Complex::new(params.potential(x) - mu, -k0);
        if d.re == T::zero() && d.im == T::zero() {
            return Err(Error::ZeroDivisor { site: x });
        }
        value /= d;
        sites.push(x);
        divisors.push(d.norm());
    }
    Ok(ChainGraph { value, sites, divisors })
}
