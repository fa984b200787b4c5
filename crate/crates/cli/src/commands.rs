use anyhow::Context;
use serde::Serialize;

use quasiloc::analysis::{fit_spatial_decay, fit_temporal_decay, phase_scan, FitWindow, ScanSettings, TemporalDecay};
use quasiloc::counterterm::{counterterm_grid, fix_counterterm};
use quasiloc::many_body::spectral::MAX_ED_SITES;
use quasiloc::many_body::{Correlator, HamiltonianOptions, VectorPolicy};
use quasiloc::multiscale::{chain_graph_value, convergent_offsets, decay_profile, Branch, DenominatorMode, ScaleFamily};
use quasiloc::single_particle::{lyapunov_exponent, spectrum_report};
use quasiloc::{DecayFit, DiophantineFrequency, ModelParams, SpectralDecomposition};

use crate::config::*;
use crate::output::{Cell, Output, Table};

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ed_params(model: &ModelArgs) -> Result<ModelParams, String> {
    let p = model.params();
    p.validate().map_err(|e| e.to_string())?;
    check(p.n_sites() <= MAX_ED_SITES, format!("exact diagonalization needs L+1 <= {MAX_ED_SITES}"))?;
    Ok(p)
}

fn spectrum_params(l: usize, eps: f64, u: f64, omega: f64, theta: f64) -> Result<ModelParams, String> {
    // the Fermi site only matters for validation here; keep it inside short chains
    let p = ModelParams::new(l).with_hopping(eps).with_disorder(u).with_omega(omega).with_theta(theta).with_x_hat(1);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn scale_family(a: &ScalesArgs) -> Result<ScaleFamily<f64>, String> {
    let p = ModelParams::new(2 * a.xhat.unsigned_abs() as usize + 2)
        .with_omega(a.omega)
        .with_theta(a.theta)
        .with_x_hat(a.xhat)
        .with_tau(a.tau);
    let mut fam = ScaleFamily::new(&p).map_err(|e| e.to_string())?;
    if let Some(g) = a.gamma {
        fam = fam.with_gamma(g).map_err(|e| e.to_string())?;
    }
    check(a.hmin <= 0, "hmin must be non-positive")?;
    Ok(fam)
}

/// Checks every precondition before any heavy work starts.
pub fn validate(cmd: &Command) -> Result<(), String> {
    match cmd {
        Command::Dioph(a) => {
            check(a.omega.is_finite() && a.omega > 0.0 && a.omega < 1.0, "omega must lie in (0, 1)")?;
            check(a.tau > 1.0, "tau must exceed 1")?;
            check(a.qmax >= 1, "qmax must be positive")?;
            check(
                a.theta.iter().all(|&t| t != 0.0 && t.is_finite()),
                "theta must be finite and non vanishing (localization requires x_hat and theta non vanishing)",
            )
        }
        Command::Spectrum(a) => spectrum_params(a.l, a.eps, a.disorder, a.omega, a.theta).map(|_| ()),
        Command::Lyapunov(a) => {
            spectrum_params(2, a.eps, a.disorder, a.omega, a.theta)?;
            check(a.eps != 0.0, "eps must be non-zero for the transfer matrix")?;
            check(a.steps >= 1000, "steps must be at least 1000")?;
            check(a.energies.iter().all(|e| e.is_finite()), "energies must be finite")
        }
        Command::Correlate(a) => {
            let p = ed_params(&a.model)?;
            check(
                a.times.iter().all(|t| t.is_finite() && t.abs() < p.beta),
                "every time must satisfy |t| < beta",
            )
        }
        Command::Density(a) => ed_params(&a.model).map(|_| ()),
        Command::Counterterm(a) => {
            ed_params(&a.model)?;
            check(a.tol > 0.0, "tol must be positive")?;
            if let Some(g) = &a.grid {
                check(g.count >= 1 && g.start.is_finite() && g.stop.is_finite(), "grid needs at least one point")?;
            }
            Ok(())
        }
        Command::Scales(a) => scale_family(a).map(|_| ()),
        Command::Chain(a) => {
            let p = a.model.params();
            p.validate().map_err(|e| e.to_string())?;
            check(a.alphas.iter().all(|s| (-1..=1).contains(s)), "alphas must be -1, 0 or +1")?;
            check(p.contains(a.x1), "x1 must be a lattice site")?;
            check(a.k0.is_finite(), "k0 must be finite")
        }
        Command::Decay(a) => {
            let p = ed_params(&a.model)?;
            check(a.dmin >= 1 && a.dmax >= a.dmin, "need 1 <= dmin <= dmax")?;
            check(p.contains(a.x) && p.contains(a.y), "x and y must be lattice sites")?;
            check(a.samples >= 5, "the temporal fit needs at least 5 samples")
        }
        Command::Scan(a) => {
            ed_params(&a.model)?;
            check(a.tol > 0.0, "tol must be positive")?;
            check(a.eps_grid.count >= 1 && a.u_grid.count >= 1, "grids need at least one point")?;
            check(!a.l_list.is_empty(), "L-list must not be empty")?;
            for &l in &a.l_list {
                let m = &a.model;
                spectrum_params(l, m.eps, m.disorder, m.omega, m.theta)?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DiophOut {
    c0_freq: f64,
    argmin_x: i64,
    c0_phase: Vec<quasiloc::diophantine::PhaseConstant<f64>>,
    c0: f64,
    partial_quotients: Vec<u64>,
    convergents: Vec<quasiloc::diophantine::Convergent>,
    omega: f64,
    tau: f64,
    q_max: u64,
}

#[derive(Serialize)]
struct DecayOut {
    nu: f64,
    spatial: Option<DecayFit>,
    spatial_error: Option<String>,
    temporal: TemporalDecay<f64>,
}

fn options(tadpole: bool) -> HamiltonianOptions {
    HamiltonianOptions { tadpole_counterterm: tadpole }
}

pub fn execute(cmd: &Command) -> anyhow::Result<Output> {
    match cmd {
        Command::Dioph(a) => {
            let mut d = DiophantineFrequency::certify(a.omega, a.tau, a.qmax)?;
            for &t in &a.theta {
                d = d.with_phase(t)?;
            }
            let out = DiophOut {
                c0_freq: d.c0_freq,
                argmin_x: d.c0_freq_argmin,
                c0: d.c0(),
                c0_phase: d.c0_phase.clone(),
                partial_quotients: d.partial_quotients.clone(),
                convergents: d.convergents.clone(),
                omega: d.omega,
                tau: d.tau,
                q_max: d.q_max,
            };
            Output::new(&out, None)
        }
        Command::Spectrum(a) => {
            let p = spectrum_params(a.l, a.eps, a.disorder, a.omega, a.theta).map_err(anyhow::Error::msg)?;
            let states = spectrum_report(&p)?;
            let rows = states
                .iter()
                .enumerate()
                .map(|(i, s)| vec![Cell::from(i), s.energy.into(), s.xi.into(), s.ipr.into()])
                .collect();
            Output::new(&states, Some(Table { columns: vec!["index", "energy", "xi", "ipr"], rows }))
        }
        Command::Lyapunov(a) => {
            let values: Vec<(f64, f64)> = a
                .energies
                .iter()
                .map(|&e| Ok((e, lyapunov_exponent(e, a.eps, a.disorder, a.omega, a.theta, a.steps)?)))
                .collect::<quasiloc::Result<_>>()?;
            let rows = values.iter().map(|&(e, g)| vec![e.into(), g.into()]).collect();
            Output::new(&values, Some(Table { columns: vec!["energy", "lyapunov"], rows }))
        }
        Command::Correlate(a) => {
            let p = a.model.params();
            let sp = SpectralDecomposition::compute(&p, options(a.tadpole), VectorPolicy::Thermal)?;
            let table = Correlator::new(&sp)?.table(&a.times)?;
            let mut rows = Vec::new();
            for x in p.sites() {
                for y in p.sites() {
                    for (ti, &t) in a.times.iter().enumerate() {
                        rows.push(vec![Cell::from(x), y.into(), t.into(), table.get(x, y, ti)?.into()]);
                    }
                }
            }
            Output::new(&table, Some(Table { columns: vec!["x", "y", "t", "value"], rows }))
        }
        Command::Density(a) => {
            let p = a.model.params();
            let sp = SpectralDecomposition::compute(&p, options(a.tadpole), VectorPolicy::Thermal)?;
            let c = Correlator::new(&sp)?;
            let occ: Vec<(i64, f64)> = p.sites().map(|x| Ok((x, c.occupation(x)?))).collect::<quasiloc::Result<_>>()?;
            let rows = occ.iter().map(|&(x, n)| vec![Cell::from(x), n.into()]).collect();
            let json = serde_json::json!({ "density": sp.density(), "occupations": occ });
            Output::new(&json, Some(Table { columns: vec!["x", "occupation"], rows }))
        }
        Command::Counterterm(a) => {
            let p = a.model.params();
            let (eps, us) = match &a.grid {
                Some(g) => (g.points(), g.points()),
                None => (vec![a.model.eps], vec![a.model.interaction]),
            };
            let results = counterterm_grid(&p, &eps, &us, a.tol)
                .into_iter()
                .collect::<quasiloc::Result<Vec<_>>>()
                .context("counterterm root find failed")?;
            Output::new(&results, None)
        }
        Command::Scales(a) => {
            let fam = scale_family(a).map_err(anyhow::Error::msg)?;
            let offsets = convergent_offsets(fam.omega, 4_000_000_000);
            let hs: Vec<i32> = (a.hmin..=0).collect();
            let prof = decay_profile(&fam, Branch::Plus, &hs, &offsets, a.t_units, DenominatorMode::Exact)?;
            let rows = prof
                .iter()
                .map(|d| {
                    vec![Cell::from(d.h as i64), d.sup_g.into(), d.c_n[0].into(), d.c_n[1].into(), d.c_n[2].into()]
                })
                .collect();
            Output::new(&prof, Some(Table { columns: vec!["h", "sup_g", "C_1", "C_2", "C_3"], rows }))
        }
        Command::Chain(a) => {
            let p = a.model.params();
            let g = chain_graph_value(&p, &a.alphas, a.x1, a.k0)?;
            let rows = g
                .sites
                .iter()
                .zip(&g.divisors)
                .enumerate()
                .map(|(k, (&x, &d))| vec![Cell::from(k + 1), x.into(), d.into()])
                .collect();
            Output::new(&g, Some(Table { columns: vec!["step", "site", "divisor"], rows }))
        }
        Command::Decay(a) => {
            let mut p = a.model.params();
            if a.tune {
                p = p.clone().with_nu(fix_counterterm(&p, 1e-6)?.nu);
            }
            let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::Thermal)?;
            let half = 0.45 * p.beta;
            let mut times: Vec<f64> =
                (0..a.samples).map(|k| -half + 2.0 * half * k as f64 / (a.samples - 1) as f64).collect();
            if !times.contains(&0.0) {
                times.push(0.0);
            }
            let table = Correlator::new(&sp)?.table(&times)?;
            let window = FitWindow { d_min: a.dmin, d_max: a.dmax, boundary: a.boundary };
            let (spatial, spatial_error) = match fit_spatial_decay(&table, 0.0, window) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let temporal = fit_temporal_decay(&table, a.x, a.y)?;
            Output::new(&DecayOut { nu: p.nu, spatial, spatial_error, temporal }, None)
        }
        Command::Scan(a) => {
            let settings = ScanSettings {
                base: a.model.params(),
                sizes: a.l_list.clone(),
                window: FitWindow::default(),
                tolerance: a.tol,
            };
            let points = phase_scan(&settings, &a.eps_grid.points(), &a.u_grid.points());
            let opt = |v: Option<f64>| v.map(Cell::from).unwrap_or_else(|| Cell::Text("nan".into()));
            let rows = points
                .iter()
                .map(|pt| {
                    let flag = match pt.localized {
                        Some(true) => "localized",
                        Some(false) => "extended",
                        None => "unknown",
                    };
                    let iprs: Vec<String> = pt.median_ipr.iter().map(|(l, v)| format!("{l}:{v:.16e}")).collect();
                    let mut ipr_flags = format!("{flag};{}", iprs.join(";"));
                    if pt.resolved == Some(false) {
                        ipr_flags.push_str(";rate-unresolved");
                    }
                    vec![pt.eps.into(), pt.interaction.into(), opt(pt.nu), opt(pt.rate), opt(pt.r_squared), ipr_flags.into()]
                })
                .collect();
            Output::new(&points, Some(Table { columns: vec!["eps", "U", "nu", "rate", "r2", "ipr_flags"], rows }))
        }
    }
}
