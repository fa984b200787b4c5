//! Parameter record of the interacting chain and the smooth cutoff function.

use serde::{Deserialize, Serialize};

use crate::diophantine::{golden_mean, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::scalar::{rotation_mod1, Real};

/// Full parameter set of the chain on sites `-L/2 ..= L/2`.
///
/// The chemical potential is derived, never stored:
/// `mu = u cos 2π(omega x_hat + theta) + nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Even lattice length; the chain has `l + 1` sites.
    pub l: usize,
    /// Hopping strength `eps`.
    pub hopping: T,
    /// Strength `u` of the quasi-periodic potential.
    pub disorder: T,
    /// Nearest-neighbour interaction `U`.
    pub interaction: T,
    pub omega: T,
    /// Diophantine exponent carried along for the decay analysis.
    pub tau: T,
    pub theta: T,
    /// Site whose level sets the Fermi energy.
    pub x_hat: i64,
    /// Chemical potential counterterm.
    pub nu: T,
    pub beta: T,
    /// Ultraviolet cutoff exponent of the regularised Matsubara sums.
    pub cutoff_exponent: u32,
}

impl<T: Real> ModelParams<T> {
    /// Golden frequency, `theta = 0.2377`, `x_hat = 2`, `u = 1`, free chain.
    pub fn new(l: usize) -> Self {
        Self {
            l,
            hopping: T::zero(),
            disorder: T::one(),
            interaction: T::zero(),
            omega: golden_mean(),
            tau: T::c(DEFAULT_TAU),
            theta: T::c(0.2377),
            x_hat: 2,
            nu: T::zero(),
            beta: T::c(16.0),
            cutoff_exponent: 20,
        }
    }

    pub fn with_hopping(mut self, eps: T) -> Self {
        self.hopping = eps;
        self
    }

    pub fn with_disorder(mut self, u: T) -> Self {
        self.disorder = u;
        self
    }

    pub fn with_interaction(mut self, u_int: T) -> Self {
        self.interaction = u_int;
        self
    }

    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_theta(mut self, theta: T) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_x_hat(mut self, x_hat: i64) -> Self {
        self.x_hat = x_hat;
        self
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_l(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.tau = tau;
        self
    }

    /// Checks every structural precondition. Messages name the violated
    /// requirement so command-line users see why a run was refused.
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || !self.l.is_multiple_of(2) {
            return Err(Error::invalid("L", format!("{} must be even and positive", self.l)));
        }
        for (name, v) in [
            ("eps", self.hopping),
            ("u", self.disorder),
            ("U", self.interaction),
            ("omega", self.omega),
            ("tau", self.tau),
            ("theta", self.theta),
            ("nu", self.nu),
            ("beta", self.beta),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.beta <= T::zero() {
            return Err(Error::invalid("beta", "inverse temperature must be positive"));
        }
        if self.theta == T::zero() {
            return Err(Error::invalid(
                "theta",
                "the phase must be non vanishing (localization requires x_hat and theta non vanishing)",
            ));
        }
        if self.x_hat == 0 {
            return Err(Error::invalid(
                "x_hat",
                "the Fermi site must be non vanishing (localization requires x_hat and theta non vanishing)",
            ));
        }
        if !self.contains(self.x_hat) {
            return Err(Error::invalid("x_hat", format!("{} outside the lattice [-{h}, {h}]", self.x_hat, h = self.half())));
        }
        if self.v0() == T::zero() {
            return Err(Error::invalid("theta", "sin 2π(omega x_hat + theta) vanishes; linearisation undefined"));
        }
        Ok(())
    }

    pub fn half(&self) -> i64 {
        (self.l / 2) as i64
    }

    pub fn n_sites(&self) -> usize {
        self.l + 1
    }

    pub fn contains(&self, x: i64) -> bool {
        x.abs() <= self.half()
    }

    /// Physical sites in ascending order.
    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let h = self.half();
        -h..=h
    }

    /// Zero-based offset of site `x`.
    pub fn offset(&self, x: i64) -> Result<usize> {
        if self.contains(x) {
            Ok((x + self.half()) as usize)
        } else {
            Err(Error::SiteOutOfLattice { site: x, half: self.half() })
        }
    }

    pub fn site(&self, offset: usize) -> i64 {
        offset as i64 - self.half()
    }

    /// Centred fractional part of `omega x + theta`.
    pub fn phase(&self, x: i64) -> T {
        rotation_mod1(self.omega, x, self.theta)
    }

    /// `u cos 2π(omega x + theta)`, for any integer `x`.
    pub fn potential(&self, x: i64) -> T {
        self.disorder * (T::TAU() * self.phase(x)).cos()
    }

    /// Chemical potential without the counterterm.
    pub fn mu0(&self) -> T {
        self.potential(self.x_hat)
    }

    pub fn mu(&self) -> T {
        self.mu0() + self.nu
    }

    /// `sin 2π(omega x_hat + theta)`.
    pub fn v0(&self) -> T {
        (T::TAU() * self.phase(self.x_hat)).sin()
    }
}

/// C-infinity step: 1 for `t <= 1`, 0 for `t >= gamma`, strictly
/// decreasing in between.
pub fn smooth_step<T: Real>(t: T, gamma: T) -> T {
    if t <= T::one() {
        return T::one();
    }
    if t >= gamma {
        return T::zero();
    }
    let s = (t - T::one()) / (gamma - T::one());
    let psi = |z: T| if z <= T::zero() { T::zero() } else { (-z.recip()).exp() };
    let a = psi(T::one() - s);
    let b = psi(s);
    a / (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_preconditions() {
        let p = ModelParams::<f64>::new(8);
        assert!(p.validate().is_ok());
        assert!(ModelParams::<f64>::new(7).validate().is_err());
        let err = p.clone().with_theta(0.0).validate().unwrap_err().to_string();
        assert!(err.contains("non vanishing"), "{err}");
        let err = p.clone().with_x_hat(0).validate().unwrap_err().to_string();
        assert!(err.contains("non vanishing"), "{err}");
        assert!(p.clone().with_x_hat(5).validate().is_err());
        assert!(p.clone().with_beta(0.0).validate().is_err());
    }

    #[test]
    fn site_offsets_round_trip() {
        let p = ModelParams::<f64>::new(6);
        assert_eq!(p.sites().collect::<Vec<_>>(), vec![-3, -2, -1, 0, 1, 2, 3]);
        for x in p.sites() {
            assert_eq!(p.site(p.offset(x).unwrap()), x);
        }
        assert!(p.offset(4).is_err());
    }

    #[test]
    fn onsite_energy_examples() {
        let p = ModelParams::<f64>::new(8).with_theta(1e-300);
        assert!((p.potential(0) - 1.0).abs() < 1e-15);
        let p = ModelParams::<f64>::new(8);
        assert!((p.potential(p.x_hat) - p.mu()).abs() < 1e-15);
        let direct = (2.0 * std::f64::consts::PI * (3.0 * p.omega + 0.2377)).cos();
        assert!((p.potential(3) - direct).abs() < 1e-13);
    }

    #[test]
    fn smooth_step_shape() {
        let g = 2.0_f64;
        assert_eq!(smooth_step(0.5, g), 1.0);
        assert_eq!(smooth_step(1.0, g), 1.0);
        assert_eq!(smooth_step(2.0, g), 0.0);
        assert!((smooth_step(1.5, g) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 1..200 {
            let v = smooth_step(1.0 + k as f64 / 200.0, g);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }
}
