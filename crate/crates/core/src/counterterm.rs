//! Tuning of the chemical-potential counterterm `ν(ε, U)` by matching the
//! interacting filling to the free one.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::many_body::{HamiltonianOptions, SpectralDecomposition, VectorPolicy};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::single_particle::{build_single_particle_matrix, fermi};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const WIDENINGS: usize = 4;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountertermResult<T> {
    pub eps: T,
    pub interaction: T,
    pub nu: T,
    pub target_density: T,
    pub achieved_density: T,
    pub iterations: usize,
    /// Every bracket tried, in order, before bisection started.
    pub brackets: Vec<(T, T)>,
}

/// Filling of the non-interacting chain at `μ₀`, from one-body levels.
pub fn free_density<T: Real>(params: &ModelParams<T>) -> Result<T> {
    params.validate()?;
    let eig = build_single_particle_matrix(params).eigen()?;
    let mu = params.mu0();
    let n: T = eig.values.iter().map(|&e| fermi(params.beta, e - mu)).sum();
    Ok(n / T::from_usize(params.n_sites()).unwrap())
}

pub fn fix_counterterm<T: Real>(params: &ModelParams<T>, tolerance: T) -> Result<CountertermResult<T>> {
    fix_counterterm_with(params, HamiltonianOptions::default(), tolerance)
}

pub fn fix_counterterm_with<T: Real>(
    params: &ModelParams<T>,
    options: HamiltonianOptions,
    tolerance: T,
) -> Result<CountertermResult<T>> {
    if !(tolerance > T::zero()) {
        return Err(Error::invalid("tolerance", "must be positive"));
    }
    let params = params.clone().with_nu(T::zero());
    let target = free_density(&params)?;
    let mut result = CountertermResult {
        eps: params.hopping,
        interaction: params.interaction,
        nu: T::zero(),
        target_density: target,
        achieved_density: target,
        iterations: 0,
        brackets: Vec::new(),
    };
    // Without interaction the tuned model is the free model itself.
    if params.interaction == T::zero() && !options.tadpole_counterterm {
        return Ok(result);
    }
    let spectral = SpectralDecomposition::compute(&params, options, VectorPolicy::ValuesOnly)?;
    let mismatch = |nu: T| spectral.with_nu(nu).density() - target;
    let at_zero = mismatch(T::zero());
    result.achieved_density = at_zero + target;
    if at_zero == T::zero() {
        return Ok(result);
    }
    let coupling = params.hopping.abs().max(params.interaction.abs()).max(T::c(1e-3));
    let mut half = T::c(4.0) * coupling;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    let mut tries = 0;
    loop {
        lo = -half;
        hi = half;
        f_lo = mismatch(lo);
        f_hi = mismatch(hi);
        result.brackets.push((lo, hi));
        if f_lo.signum() != f_hi.signum() || f_lo == T::zero() || f_hi == T::zero() {
            break;
        }
        if tries == WIDENINGS {
            return Err(Error::NoSignChange {
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
                f_lo: f_lo.to_f64_lossy(),
                f_hi: f_hi.to_f64_lossy(),
            });
        }
        tries += 1;
        half *= T::c(2.0);
    }
    for it in 1..=MAX_BISECTIONS {
        let mid = (lo + hi) / T::c(2.0);
        let f_mid = mismatch(mid);
        if f_mid == T::zero() || (f_mid.abs() <= tolerance && hi - lo <= tolerance) {
            result.nu = mid;
            result.achieved_density = f_mid + target;
            result.iterations = it;
            return Ok(result);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        // degenerate bracket: no representable midpoint left
        if mid == lo && mid == hi {
            break;
        }
    }
    Err(Error::NoConvergence { index: MAX_BISECTIONS })
}

/// Summary of `ν` over an `(ε, U)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport<T> {
    /// `Some(true)` when the grid contains `(0, 0)` and `ν` is exactly 0 there.
    pub vanishes_at_zero: Option<bool>,
    /// `sup |ν| / max(|ε|, |U|)` over non-zero couplings.
    pub max_ratio: T,
    pub ratio_bound: T,
    /// Largest `|Δν| / step` between grid neighbours along either axis.
    pub max_difference_quotient: T,
    /// Ratio of the diagonal slopes `ν(2h,2h)/2h` and `ν(h,h)/h` for the two
    /// smallest non-zero diagonal points, when present.
    pub diagonal_slope_ratio: Option<T>,
    pub ratio_within_bound: bool,
}

pub fn counterterm_flow_check<T: Real>(results: &[CountertermResult<T>], ratio_bound: T) -> FlowReport<T> {
    let key = |r: &CountertermResult<T>| (r.eps.to_f64_lossy().to_bits(), r.interaction.to_f64_lossy().to_bits());
    let grid: BTreeMap<_, &CountertermResult<T>> = results.iter().map(|r| (key(r), r)).collect();
    let vanishes_at_zero = results
        .iter()
        .find(|r| r.eps == T::zero() && r.interaction == T::zero())
        .map(|r| r.nu == T::zero());
    let max_ratio = results
        .iter()
        .filter_map(|r| {
            let c = r.eps.abs().max(r.interaction.abs());
            (c > T::zero()).then(|| r.nu.abs() / c)
        })
        .fold(T::zero(), T::max);

    let mut eps_axis: Vec<T> = results.iter().map(|r| r.eps).collect();
    let mut u_axis: Vec<T> = results.iter().map(|r| r.interaction).collect();
    for axis in [&mut eps_axis, &mut u_axis] {
        axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        axis.dedup();
    }
    let lookup = |e: T, u: T| grid.get(&(e.to_f64_lossy().to_bits(), u.to_f64_lossy().to_bits())).map(|r| r.nu);
    let mut max_dq = T::zero();
    for &e in &eps_axis {
        for w in u_axis.windows(2) {
            if let (Some(a), Some(b)) = (lookup(e, w[0]), lookup(e, w[1])) {
                max_dq = max_dq.max((b - a).abs() / (w[1] - w[0]));
            }
        }
    }
    for &u in &u_axis {
        for w in eps_axis.windows(2) {
            if let (Some(a), Some(b)) = (lookup(w[0], u), lookup(w[1], u)) {
                max_dq = max_dq.max((b - a).abs() / (w[1] - w[0]));
            }
        }
    }
    let diagonal: Vec<(T, T)> = eps_axis
        .iter()
        .filter(|&&e| e > T::zero())
        .filter_map(|&e| lookup(e, e).map(|nu| (e, nu)))
        .collect();
    let diagonal_slope_ratio = diagonal.iter().find_map(|&(h, nu_h)| {
        diagonal
            .iter()
            .find(|&&(h2, _)| (h2 - T::c(2.0) * h).abs() <= T::c(1e-12) * h)
            .and_then(|&(h2, nu_2h)| (nu_h != T::zero()).then(|| (nu_2h / h2) / (nu_h / h)))
    });
    FlowReport {
        vanishes_at_zero,
        max_ratio,
        ratio_bound,
        max_difference_quotient: max_dq,
        diagonal_slope_ratio,
        ratio_within_bound: max_ratio <= ratio_bound,
    }
}

/// Tune `ν` at every point of an `(ε, U)` grid in parallel. Results come
/// back in the order `eps` outer, `U` inner.
pub fn counterterm_grid<T: Real>(
    base: &ModelParams<T>,
    eps_values: &[T],
    u_values: &[T],
    tolerance: T,
) -> Vec<Result<CountertermResult<T>>> {
    let points: Vec<(T, T)> = eps_values.iter().flat_map(|&e| u_values.iter().map(move |&u| (e, u))).collect();
    points
        .par_iter()
        .map(|&(e, u)| fix_counterterm(&base.clone().with_hopping(e).with_interaction(u), tolerance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_gives_zero() {
        let p = ModelParams::<f64>::new(6).with_beta(10.0);
        let r = fix_counterterm(&p, 1e-6).unwrap();
        assert_eq!(r.nu, 0.0);
        let r = fix_counterterm(&p.clone().with_hopping(0.2), 1e-6).unwrap();
        assert_eq!(r.nu, 0.0);
    }

    #[test]
    fn free_density_matches_many_body_free_density() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.2).with_beta(7.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::ValuesOnly).unwrap();
        assert!((sp.density() - free_density(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn interacting_root_reaches_target() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.1).with_interaction(0.1).with_beta(10.0);
        let r = fix_counterterm(&p, 1e-8).unwrap();
        assert!((r.achieved_density - r.target_density).abs() <= 1e-8);
        let again = fix_counterterm(&p, 1e-8).unwrap();
        assert_eq!(r.nu.to_bits(), again.nu.to_bits());
        let shifted = fix_counterterm(&p.clone().with_theta(p.theta + 1.0), 1e-8).unwrap();
        assert!((shifted.nu - r.nu).abs() < 1e-9);
    }

    #[test]
    fn flow_report_on_trivial_grid() {
        let r = CountertermResult {
            eps: 0.0,
            interaction: 0.0,
            nu: 0.0,
            target_density: 0.1,
            achieved_density: 0.1,
            iterations: 0,
            brackets: vec![],
        };
        let rep = counterterm_flow_check(&[r], 2.0);
        assert_eq!(rep.vanishes_at_zero, Some(true));
        assert!(rep.ratio_within_bound);
        assert_eq!(rep.max_difference_quotient, 0.0);
    }
}
