//! The non-interacting layer: almost-Mathieu diagnostics and the free
//! Matsubara propagator with its equal-time convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fit_line, SquareMatrix, SymmetricEigen};
use crate::model::ModelParams;
use crate::scalar::{rotation_mod1, Real};

/// `u cos 2π(omega x + theta)` at a lattice site.
pub fn onsite_energy<T: Real>(params: &ModelParams<T>, x: i64) -> Result<T> {
    params.offset(x)?;
    Ok(params.potential(x))
}

/// Open-chain single-particle Hamiltonian in tridiagonal form: diagonal
/// onsite energies, `-eps` between neighbours, no wrap-around bond.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> SquareMatrix<T> {
        let n = self.dim();
        let mut m = SquareMatrix::zeros(n);
        for (i, &d) in self.diag.iter().enumerate() {
            m.set(i, i, d);
        }
        for (i, &e) in self.off.iter().enumerate() {
            m.set(i + 1, i, e);
            m.set(i, i + 1, e);
        }
        m
    }

    pub fn eigen(&self) -> Result<SymmetricEigen<T>> {
        SymmetricEigen::tridiagonal(&self.diag, &self.off, true)
    }
}

pub fn build_single_particle_matrix<T: Real>(params: &ModelParams<T>) -> Tridiagonal<T> {
    let diag = params.sites().map(|x| params.potential(x)).collect();
    let off = vec![-params.hopping; params.l];
    Tridiagonal { diag, off }
}

/// Transfer matrix `[[(phi_x - E)/eps, -1], [1, 0]]` mapping
/// `(psi_x, psi_{x-1})` to `(psi_{x+1}, psi_x)`.
pub fn transfer_matrix<T: Real>(energy: T, eps: T, u: T, omega: T, theta: T, x: i64) -> Result<[[T; 2]; 2]> {
    if eps == T::zero() {
        return Err(Error::ZeroHopping);
    }
    let phi = u * (T::TAU() * rotation_mod1(omega, x, theta)).cos();
    Ok([[(phi - energy) / eps, -T::one()], [T::one(), T::zero()]])
}

/// Lyapunov exponent of the almost-Mathieu cocycle, starting from `(1, 0)`.
pub fn lyapunov_exponent<T: Real>(energy: T, eps: T, u: T, omega: T, theta: T, n_steps: usize) -> Result<T> {
    lyapunov_from(energy, eps, u, omega, theta, n_steps, [T::one(), T::zero()])
}

/// Lyapunov exponent from an arbitrary non-zero starting vector.
pub fn lyapunov_from<T: Real>(
    energy: T,
    eps: T,
    u: T,
    omega: T,
    theta: T,
    n_steps: usize,
    start: [T; 2],
) -> Result<T> {
    if eps == T::zero() {
        return Err(Error::ZeroHopping);
    }
    if n_steps < 1000 {
        return Err(Error::invalid("n_steps", "at least 1000 steps are required"));
    }
    let norm0 = start[0].hypot(start[1]);
    if norm0 == T::zero() || !norm0.is_finite() {
        return Err(Error::invalid("start", "starting vector must be finite and non-zero"));
    }
    let (mut a, mut b) = (start[0] / norm0, start[1] / norm0);
    let mut log_growth = T::zero();
    for x in 0..n_steps as i64 {
        let m = transfer_matrix(energy, eps, u, omega, theta, x)?;
        let na = m[0][0] * a + m[0][1] * b;
        b = a;
        a = na;
        if x % 8 == 7 {
            let r = a.hypot(b);
            log_growth += r.ln();
            a /= r;
            b /= r;
        }
    }
    log_growth += a.hypot(b).ln();
    Ok((log_growth / T::from_usize(n_steps).unwrap()).max(T::zero()))
}

/// Decay length and inverse participation ratio of one eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization<T> {
    /// `-1 / slope` of `log|psi|` against distance from the peak; zero when
    /// the fit is impossible, infinite for a non-decaying profile.
    pub xi: T,
    pub ipr: T,
    pub peak: usize,
    /// Sites used in the fit (0 when it failed).
    pub fit_sites: usize,
}

const AMPLITUDE_FLOOR: f64 = 1e-12;

pub fn eigenstate_localization<T: Real>(eigvec: &[T]) -> Localization<T> {
    let ipr = eigvec.iter().map(|&v| v.powi(4)).sum();
    let peak = eigvec
        .iter()
        .enumerate()
        .fold((0, T::zero()), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc })
        .0;
    let (ds, logs): (Vec<T>, Vec<T>) = eigvec
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > T::c(AMPLITUDE_FLOOR))
        .map(|(i, v)| (T::from_usize(i.abs_diff(peak)).unwrap(), v.abs().ln()))
        .unzip();
    let fit = if ds.len() >= 4 { fit_line(&ds, &logs) } else { None };
    match fit {
        Some(f) => {
            let xi = if f.slope < T::zero() { -f.slope.recip() } else { T::infinity() };
            Localization { xi, ipr, peak, fit_sites: ds.len() }
        }
        None => Localization { xi: T::zero(), ipr, peak, fit_sites: 0 },
    }
}

/// One row of the single-particle spectrum report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateReport<T> {
    pub energy: T,
    pub xi: T,
    pub ipr: T,
}

pub fn spectrum_report<T: Real>(params: &ModelParams<T>) -> Result<Vec<StateReport<T>>> {
    let eig = build_single_particle_matrix(params).eigen()?;
    let vecs = eig.vectors.as_ref().ok_or(Error::MissingEigenvectors)?;
    Ok(eig
        .values
        .iter()
        .zip(vecs)
        .map(|(&energy, v)| {
            let loc = eigenstate_localization(v);
            StateReport { energy, xi: loc.xi, ipr: loc.ipr }
        })
        .collect())
}

/// Fermi factor `1 / (exp(beta x) + 1)` without overflow.
pub fn fermi<T: Real>(beta: T, x: T) -> T {
    let z = beta * x;
    if z >= T::zero() {
        let e = (-z).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + z.exp())
    }
}

/// Free imaginary-time propagator `ḡ(x, t)` on the diagonal, with the
/// mean of the one-sided limits at `t = 0`.
pub fn free_propagator<T: Real>(params: &ModelParams<T>, x: i64, t: T) -> Result<T> {
    params.offset(x)?;
    if !t.is_finite() || t.abs() >= params.beta {
        return Err(Error::TimeOutOfRange { t: t.to_f64_lossy(), beta: params.beta.to_f64_lossy() });
    }
    let delta = params.potential(x) - params.mu();
    Ok(level_propagator(delta, params.beta, t))
}

/// `ḡ` of a single level at energy `delta` above the chemical potential.
pub fn level_propagator<T: Real>(delta: T, beta: T, t: T) -> T {
    let one = T::one();
    if t > T::zero() {
        // e^{-Δt} (1 - n)
        if delta >= T::zero() {
            (-delta * t).exp() / (one + (-beta * delta).exp())
        } else {
            (delta * (beta - t)).exp() / (one + (beta * delta).exp())
        }
    } else if t < T::zero() {
        // -e^{-Δt} n
        if delta >= T::zero() {
            -(-delta * (t + beta)).exp() / (one + (-beta * delta).exp())
        } else {
            -(-delta * t).exp() / (one + (beta * delta).exp())
        }
    } else {
        (one - T::c(2.0) * fermi(beta, delta)) / T::c(2.0)
    }
}

/// Occupation `-ḡ(x, 0^-)`.
pub fn free_occupation<T: Real>(params: &ModelParams<T>, x: i64) -> Result<T> {
    params.offset(x)?;
    Ok(fermi(params.beta, params.potential(x) - params.mu()))
}

/// `½[ḡ(x, 0⁺) − ḡ(x, 0⁻)]`: half the unit jump of the propagator at
/// coincident times, i.e. `+½` for every level and temperature.
pub fn half_jump<T: Real>(params: &ModelParams<T>, x: i64) -> Result<T> {
    let n = free_occupation(params, x)?;
    let plus = T::one() - n;
    let minus = -n;
    Ok((plus - minus) / T::c(2.0))
}

/// Tadpole counterterm `U (ν̃(x+1) + ν̃(x-1))`; neighbours outside the
/// chain contribute nothing.
pub fn tadpole_counterterm<T: Real>(params: &ModelParams<T>, x: i64) -> Result<T> {
    params.offset(x)?;
    let mut sum = T::zero();
    for y in [x - 1, x + 1] {
        if params.contains(y) {
            sum += half_jump(params, y)?;
        }
    }
    Ok(params.interaction * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::smooth_step;

    fn params() -> ModelParams<f64> {
        ModelParams::new(8).with_hopping(0.2).with_beta(4.0)
    }

    /// `(1/β) Σ_{k0} χ̄(γ^{-M}|k0|) e^{-i k0 t} / (-i k0 + Δ)` over fermionic
    /// Matsubara frequencies, real part, with ±k0 paired.
    fn matsubara_truncated(delta: f64, beta: f64, t: f64, gamma: f64, m: i32) -> f64 {
        let scale = gamma.powi(m);
        let k_max = gamma * scale;
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut n = 0u64;
        loop {
            let k0 = std::f64::consts::PI * (2 * n + 1) as f64 / beta;
            if k0 >= k_max {
                break;
            }
            let w = smooth_step(k0 / scale, gamma);
            let term = 2.0 * w * (delta * (k0 * t).cos() + k0 * (k0 * t).sin()) / (k0 * k0 + delta * delta);
            // Kahan summation
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            n += 1;
        }
        sum / beta
    }

    #[test]
    fn matrix_structure() {
        let p = params();
        let m = build_single_particle_matrix(&p).to_dense();
        assert!(m.is_symmetric(0.0));
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                if i.abs_diff(j) > 1 {
                    assert_eq!(m.get(i, j), 0.0);
                }
            }
        }
        let p0 = params().with_hopping(0.0);
        let m0 = build_single_particle_matrix(&p0).to_dense();
        for (i, x) in p0.sites().enumerate() {
            assert_eq!(m0.get(i, i), p0.potential(x));
            assert!(m0.row(i).iter().enumerate().all(|(j, &v)| j == i || v == 0.0));
        }
    }

    #[test]
    fn three_site_dirichlet_chain() {
        let p = ModelParams::<f64>::new(2).with_hopping(0.3).with_x_hat(1);
        let m = build_single_particle_matrix(&p).to_dense();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(2, 0), 0.0);
        assert_eq!(m.get(0, 1), -0.3);
        assert_eq!(m.get(1, 2), -0.3);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let p = ModelParams::<f64>::new(60).with_hopping(0.4);
        let eig = build_single_particle_matrix(&p).eigen().unwrap();
        let v = eig.vectors.unwrap();
        for i in 0..v.len() {
            for j in 0..=i {
                let d = crate::linalg::dot(&v[i], &v[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transfer_matrices_are_unimodular() {
        for x in -5..5 {
            let m = transfer_matrix(0.3_f64, 0.2, 1.0, 0.618, 0.1, x).unwrap();
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!((det - 1.0).abs() < 1e-15);
        }
        assert_eq!(transfer_matrix(0.3, 0.0, 1.0, 0.618, 0.1, 0), Err(Error::ZeroHopping));
        assert!(lyapunov_exponent(0.3, 0.0, 1.0, 0.618, 0.1, 5000).is_err());
        assert!(lyapunov_exponent(0.3, 0.2, 1.0, 0.618, 0.1, 10).is_err());
    }

    #[test]
    fn lyapunov_independent_of_start() {
        let omega = crate::diophantine::golden_mean::<f64>();
        let a = lyapunov_from(0.1, 0.2, 1.0, omega, 0.2377, 1_000_000, [1.0, 0.0]).unwrap();
        let b = lyapunov_from(0.1, 0.2, 1.0, omega, 0.2377, 1_000_000, [0.3, -0.9]).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn localization_of_simple_vectors() {
        let mut delta = vec![0.0; 11];
        delta[4] = 1.0;
        let loc = eigenstate_localization(&delta);
        assert_eq!(loc.ipr, 1.0);
        assert_eq!(loc.xi, 0.0);
        let n = 21;
        let uniform = vec![1.0 / (n as f64).sqrt(); n];
        let loc = eigenstate_localization(&uniform);
        assert!((loc.ipr - 1.0 / n as f64).abs() < 1e-15);
        let expo: Vec<f64> = (0..30).map(|i| (-(i as f64 - 10.0).abs() / 2.5).exp()).collect();
        let norm = expo.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expo: Vec<f64> = expo.iter().map(|v| v / norm).collect();
        let loc = eigenstate_localization(&expo);
        assert!((loc.xi - 2.5).abs() < 1e-9);
    }

    #[test]
    fn ipr_bounds_hold() {
        let p = ModelParams::<f64>::new(40).with_hopping(0.45);
        let n = p.n_sites() as f64;
        for s in spectrum_report(&p).unwrap() {
            assert!(s.ipr >= 1.0 / n - 1e-12 && s.ipr <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn propagator_limits() {
        let p = ModelParams::<f64>::new(8).with_beta(200.0);
        for x in p.sites() {
            let delta = p.potential(x) - p.mu();
            let below = free_propagator(&p, x, -1e-9).unwrap();
            if delta > 0.05 {
                assert!(below.abs() < 1e-12, "empty level must vanish at 0^-");
            } else if delta < -0.05 {
                assert!((below + 1.0).abs() < 1e-6);
            }
            let n = free_occupation(&p, x).unwrap();
            assert!((free_propagator(&p, x, 0.0).unwrap() - (1.0 - 2.0 * n) / 2.0).abs() < 1e-15);
        }
        assert!(free_propagator(&p, 0, 200.0).is_err());
        assert!(free_propagator(&p, 9, 0.1).is_err());
    }

    #[test]
    fn propagator_is_antiperiodic() {
        let p = ModelParams::<f64>::new(8).with_beta(7.0);
        for x in p.sites() {
            for k in 1..20 {
                let t = 7.0 * k as f64 / 20.0;
                let a = free_propagator(&p, x, t - 7.0).unwrap();
                let b = free_propagator(&p, x, t).unwrap();
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn propagator_obeys_its_ode_and_jump() {
        let p = ModelParams::<f64>::new(8).with_beta(5.0);
        let h = 1e-5;
        for x in p.sites() {
            let delta = p.potential(x) - p.mu();
            for &t in &[-3.0, -1.0, 0.5, 2.0, 4.0] {
                let d = (free_propagator(&p, x, t + h).unwrap() - free_propagator(&p, x, t - h).unwrap()) / (2.0 * h);
                let g = free_propagator(&p, x, t).unwrap();
                assert!((d + delta * g).abs() < 1e-8);
            }
            let jump = free_propagator(&p, x, 1e-12).unwrap() - free_propagator(&p, x, -1e-12).unwrap();
            assert!((jump - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn truncated_matsubara_sum_converges_to_closed_form() {
        let p = ModelParams::<f64>::new(8).with_beta(1.0);
        let t = p.beta / 3.0;
        for x in [-2, 1, 3] {
            let delta = p.potential(x) - p.mu();
            let exact = free_propagator(&p, x, t).unwrap();
            let errs: Vec<f64> =
                [20, 24, 28].iter().map(|&m| (matsubara_truncated(delta, p.beta, t, 2.0, m) - exact).abs()).collect();
            assert!(errs[2] < 1e-6, "{errs:?}");
            assert!(errs[2] <= errs[0] + 1e-9, "{errs:?}");
        }
    }

    #[test]
    fn tadpole_counterterm_sign_from_regularised_sum() {
        // ν̃ is the mismatch between the one-sided limit and the cutoff
        // regularisation at coincident times.
        let p = ModelParams::<f64>::new(8).with_beta(3.0).with_interaction(0.4);
        for x in p.sites() {
            let delta = p.potential(x) - p.mu();
            let regularised = matsubara_truncated(delta, p.beta, 0.0, 2.0, 24);
            let g_plus = free_propagator(&p, x, 1e-13).unwrap();
            let oracle = g_plus - regularised;
            assert!((half_jump(&p, x).unwrap() - oracle).abs() < 1e-6);
        }
        assert!((tadpole_counterterm(&p, 0).unwrap() - 0.4).abs() < 1e-15);
        assert!((tadpole_counterterm(&p, 4).unwrap() - 0.2).abs() < 1e-15);
        let free = p.clone().with_interaction(0.0);
        assert!(free.sites().all(|x| tadpole_counterterm(&free, x).unwrap() == 0.0));
    }
}
