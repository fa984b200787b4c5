//! Fits of correlation decay and coarse `(ε, U)` localization scans.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterterm::fix_counterterm;
use crate::error::{Error, Result};
use crate::linalg::{fit_line, median};
use crate::many_body::{Correlator, CorrelationFunction, HamiltonianOptions, SpectralDecomposition, VectorPolicy};
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::single_particle::spectrum_report;

const VALUE_FLOOR: f64 = 1e-14;

/// Distance window and boundary exclusion for spatial fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub d_min: usize,
    pub d_max: usize,
    /// Sites dropped at each end of the chain.
    pub boundary: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { d_min: 2, d_max: 8, boundary: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit<T> {
    pub xi_fit: T,
    pub rate: T,
    pub prefactor: T,
    pub r_squared: T,
    pub window: FitWindow,
    /// `|log max(|ε|, |U|)|`; infinite at zero coupling.
    pub theorem_rate: T,
    pub rate_ratio: T,
    pub tau: T,
    /// `false` when the rate is below the `2π/L` finite-size floor.
    pub resolved: bool,
    /// Envelope `(d, max |S|/log-factor)` the line was fitted to.
    pub envelope: Vec<(usize, T)>,
}

/// `max(1, log(1 + min(|x|, |y|))^τ)`.
pub fn log_factor<T: Real>(x: i64, y: i64, tau: T) -> T {
    let m = T::from_int(x.abs().min(y.abs()));
    (T::one() + m).ln().powf(tau).max(T::one())
}

/// `(1 + min(|x|, |y|))^{−τ}`.
pub fn time_scale<T: Real>(x: i64, y: i64, tau: T) -> T {
    (T::one() + T::from_int(x.abs().min(y.abs()))).powf(-tau)
}

pub fn theorem_rate<T: Real>(eps: T, interaction: T) -> T {
    let c = eps.abs().max(interaction.abs());
    if c == T::zero() {
        T::infinity()
    } else {
        c.ln().abs()
    }
}

/// Exponential fit of `|S(x, y, t)|` against `|x − y|` at a tabulated time.
pub fn fit_spatial_decay<T: Real>(corr: &CorrelationFunction<T>, t_fixed: T, window: FitWindow) -> Result<DecayFit<T>> {
    let ti = corr
        .time_index(t_fixed)
        .ok_or_else(|| Error::Fit(format!("time {} is not tabulated", t_fixed.to_f64_lossy())))?;
    let p = &corr.params;
    let tau = p.tau;
    let lo = -p.half() + window.boundary as i64;
    let hi = p.half() - window.boundary as i64;
    if window.d_min == 0 || window.d_max < window.d_min {
        return Err(Error::Fit("window must satisfy 1 <= d_min <= d_max".into()));
    }
    let mut env: BTreeMap<usize, T> = BTreeMap::new();
    let mut any_nonzero = false;
    for x in lo..=hi {
        for y in lo..=hi {
            let d = x.abs_diff(y) as usize;
            if d == 0 {
                continue;
            }
            let v = corr.get(x, y, ti)?.abs();
            any_nonzero |= v > T::c(VALUE_FLOOR);
            if d < window.d_min || d > window.d_max {
                continue;
            }
            let e = env.entry(d).or_insert(T::zero());
            *e = e.max(v / log_factor(x, y, tau));
        }
    }
    if !any_nonzero {
        return Err(Error::Fit("off-diagonal identically zero".into()));
    }
    if env.len() < 4 {
        return Err(Error::Fit(format!("only {} distinct distances inside the bulk window", env.len())));
    }
    if let Some((d, v)) = env.iter().find(|(_, &v)| v <= T::c(VALUE_FLOOR)) {
        return Err(Error::Fit(format!("value {} at distance {d} is below the fit floor", v.to_f64_lossy())));
    }
    let xs: Vec<T> = env.keys().map(|&d| T::from_usize(d).unwrap()).collect();
    let ys: Vec<T> = env.values().map(|v| v.ln()).collect();
    let line = fit_line(&xs, &ys).ok_or_else(|| Error::Fit("degenerate abscissae".into()))?;
    let rate = -line.slope;
    if !(rate > T::zero()) {
        return Err(Error::Fit(format!("no decay: fitted slope {}", line.slope.to_f64_lossy())));
    }
    let th = theorem_rate(p.hopping, p.interaction);
    let floor = T::TAU() / T::from_usize(p.l).unwrap();
    Ok(DecayFit {
        xi_fit: rate.recip(),
        rate,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
        window,
        theorem_rate: th,
        rate_ratio: rate / th,
        tau,
        resolved: rate >= floor,
        envelope: env.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDecay<T> {
    pub x: i64,
    pub y: i64,
    /// `Δ = (1 + min(|x|, |y|))^{−τ}`.
    pub delta: T,
    /// `sup_t |S| (1 + (Δ|t|)^N)` for `N = 1, 2, 3`.
    pub sup_products: [T; 3],
    /// The envelope `max(|S(s)|, |S(−s)|)` is non-increasing over the
    /// non-zero samples with `s ≤ β/2`.
    pub monotone: bool,
    pub samples: usize,
}

pub fn fit_temporal_decay<T: Real>(corr: &CorrelationFunction<T>, x: i64, y: i64) -> Result<TemporalDecay<T>> {
    if corr.times.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 time samples, got {}", corr.times.len())));
    }
    let p = &corr.params;
    let delta = time_scale(x, y, p.tau);
    let mut sup = [T::zero(); 3];
    let mut by_abs: BTreeMap<u64, T> = BTreeMap::new();
    for (ti, &t) in corr.times.iter().enumerate() {
        let v = corr.get(x, y, ti)?.abs();
        for (k, s) in sup.iter_mut().enumerate() {
            *s = s.max(v * (T::one() + (delta * t.abs()).powi(k as i32 + 1)));
        }
        if t != T::zero() && t.abs() <= p.beta / T::c(2.0) {
            let key = t.abs().to_f64_lossy().to_bits();
            let e = by_abs.entry(key).or_insert(T::zero());
            *e = e.max(v);
        }
    }
    let env: Vec<T> = by_abs.into_values().collect();
    let monotone = env.windows(2).all(|w| w[1] <= w[0] * (T::one() + T::c(1e-12)));
    Ok(TemporalDecay { x, y, delta, sup_products: sup, monotone, samples: corr.times.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint<T> {
    pub eps: T,
    pub interaction: T,
    pub nu: Option<T>,
    /// Spatial decay rate; `+∞` in the ultralocal case.
    pub rate: Option<T>,
    pub r_squared: Option<T>,
    pub resolved: Option<bool>,
    /// `(L, median IPR)` of the single-particle eigenstates.
    pub median_ipr: Vec<(usize, T)>,
    /// IPR·(L+1) grows faster than the square root of the size ratio.
    pub localized: Option<bool>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings<T> {
    pub base: ModelParams<T>,
    pub sizes: Vec<usize>,
    pub window: FitWindow,
    pub tolerance: T,
}

fn scan_point<T: Real>(settings: &ScanSettings<T>, eps: T, u: T) -> PhasePoint<T> {
    let mut point = PhasePoint {
        eps,
        interaction: u,
        nu: None,
        rate: None,
        r_squared: None,
        resolved: None,
        median_ipr: Vec::new(),
        localized: None,
        errors: Vec::new(),
    };
    let params = settings.base.clone().with_hopping(eps).with_interaction(u);
    match fix_counterterm(&params, settings.tolerance) {
        Ok(r) => point.nu = Some(r.nu),
        Err(e) => point.errors.push(format!("counterterm: {e}")),
    }
    if eps == T::zero() && u == T::zero() {
        point.rate = Some(T::infinity());
    } else if let Some(nu) = point.nu {
        let tuned = params.clone().with_nu(nu);
        let fit = SpectralDecomposition::compute(&tuned, HamiltonianOptions::default(), VectorPolicy::Thermal)
            .and_then(|sp| Correlator::new(&sp)?.table(&[T::zero()]))
            .and_then(|c| fit_spatial_decay(&c, T::zero(), settings.window));
        match fit {
            Ok(f) => {
                point.rate = Some(f.rate);
                point.r_squared = Some(f.r_squared);
                point.resolved = Some(f.resolved);
            }
            Err(e) => point.errors.push(format!("spatial fit: {e}")),
        }
    }
    for &l in &settings.sizes {
        let p = settings.base.clone().with_l(l).with_hopping(eps);
        match spectrum_report(&p) {
            Ok(states) => {
                let iprs: Vec<T> = states.iter().map(|s| s.ipr).collect();
                if let Some(m) = median(&iprs) {
                    point.median_ipr.push((l, m));
                }
            }
            Err(e) => point.errors.push(format!("spectrum at L={l}: {e}")),
        }
    }
    if let (Some(&(l0, i0)), Some(&(l1, i1))) = (point.median_ipr.first(), point.median_ipr.last()) {
        if l1 > l0 {
            let growth = (i1 * T::from_usize(l1 + 1).unwrap()) / (i0 * T::from_usize(l0 + 1).unwrap());
            let size_ratio = T::from_usize(l1 + 1).unwrap() / T::from_usize(l0 + 1).unwrap();
            point.localized = Some(growth > size_ratio.sqrt());
        }
    }
    point
}

/// Localization diagnostics on an `(ε, U)` grid; failures are recorded per
/// point and never abort the scan. Output order is `eps` outer, `U` inner.
pub fn phase_scan<T: Real>(settings: &ScanSettings<T>, eps_grid: &[T], u_grid: &[T]) -> Vec<PhasePoint<T>> {
    let points: Vec<(T, T)> = eps_grid.iter().flat_map(|&e| u_grid.iter().map(move |&u| (e, u))).collect();
    points.par_iter().map(|&(e, u)| scan_point(settings, e, u)).collect()
}

impl<T: Real> CorrelationFunction<T> {
    /// Tabulate an arbitrary function; used for synthetic inputs.
    pub fn from_fn(params: ModelParams<T>, times: Vec<T>, f: impl Fn(i64, i64, T) -> T) -> Self {
        let mut values = Vec::with_capacity(params.n_sites().pow(2) * times.len());
        for x in params.sites() {
            for y in params.sites() {
                values.extend(times.iter().map(|&t| f(x, y, t)));
            }
        }
        Self { params, times, values, equal_time: crate::many_body::EqualTimeConvention::MeanOfLimits }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_particle::free_propagator;
    use proptest::prelude::*;

    fn base() -> ModelParams<f64> {
        ModelParams::new(20).with_hopping(0.1)
    }

    #[test]
    fn synthetic_exponential_is_recovered() {
        let c = CorrelationFunction::from_fn(base(), vec![0.0], |x, y, _| (-2.0 * x.abs_diff(y) as f64).exp());
        let f = fit_spatial_decay(&c, 0.0, FitWindow::default()).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-6);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.resolved);
    }

    #[test]
    fn ultralocal_input_is_rejected() {
        let c = CorrelationFunction::from_fn(base(), vec![0.0], |x, y, _| if x == y { 0.5 } else { 0.0 });
        let err = fit_spatial_decay(&c, 0.0, FitWindow::default()).unwrap_err();
        assert!(err.to_string().contains("off-diagonal identically zero"));
    }

    proptest! {
        #[test]
        fn modulated_exponentials_are_exact(rate in 0.8f64..3.0, amp in 0.1f64..10.0) {
            let tau = base().tau;
            let c = CorrelationFunction::from_fn(base(), vec![0.0], |x, y, _| {
                amp * (-rate * x.abs_diff(y) as f64).exp() * log_factor(x, y, tau)
            });
            let f = fit_spatial_decay(&c, 0.0, FitWindow::default()).unwrap();
            prop_assert!((f.rate - rate).abs() < 1e-6);
            prop_assert!((f.prefactor - amp).abs() < 1e-6 * amp);
            prop_assert!(f.r_squared > 1.0 - 1e-12);
        }
    }

    #[test]
    fn slow_rates_are_unresolved() {
        let c = CorrelationFunction::from_fn(base(), vec![0.0], |x, y, _| (-0.05 * x.abs_diff(y) as f64).exp());
        assert!(!fit_spatial_decay(&c, 0.0, FitWindow::default()).unwrap().resolved);
    }

    #[test]
    fn free_temporal_decay() {
        let p = ModelParams::<f64>::new(8).with_beta(20.0);
        let times: Vec<f64> = (-9..=9).map(|k| k as f64).collect();
        let c = CorrelationFunction::from_fn(p.clone(), times.clone(), |x, y, t| {
            if x == y {
                free_propagator(&p, x, t).unwrap()
            } else {
                0.0
            }
        });
        for x in p.sites().filter(|&x| x != p.x_hat) {
            let d = fit_temporal_decay(&c, x, x).unwrap();
            assert!(d.monotone);
            assert!(d.sup_products.iter().all(|v| v.is_finite()));
            let at = |t: f64| c.get(x, x, times.iter().position(|&s| s == t).unwrap()).unwrap().abs();
            assert!(at(9.0) <= at(0.0));
        }
        let short = CorrelationFunction::from_fn(p.clone(), vec![0.0, 1.0], |_, _, _| 1.0);
        assert!(fit_temporal_decay(&short, 0, 0).is_err());
    }

    #[test]
    fn ultralocal_scan_point() {
        let settings = ScanSettings {
            base: ModelParams::new(6).with_beta(10.0),
            sizes: vec![40, 80],
            window: FitWindow { d_min: 1, d_max: 4, boundary: 0 },
            tolerance: 1e-6,
        };
        let pts = phase_scan(&settings, &[0.0], &[0.0]);
        assert_eq!(pts[0].rate, Some(f64::INFINITY));
        assert_eq!(pts[0].nu, Some(0.0));
        assert_eq!(pts[0].localized, Some(true));
    }
}
