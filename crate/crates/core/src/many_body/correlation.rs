use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SquareMatrix};
use crate::model::ModelParams;
use crate::scalar::Real;

use super::fock::{annihilate, create, FockSector};
use super::spectral::SpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualTimeConvention {
    /// `S(x, y, 0)` is the mean of the limits `t → 0⁺` and `t → 0⁻`.
    MeanOfLimits,
}

/// Time-ordered two-point function tabulated on `sites × sites × times`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationFunction<T> {
    pub params: ModelParams<T>,
    pub times: Vec<T>,
    /// Row-major over `(x, y, t)` with sites in lattice order.
    pub values: Vec<T>,
    pub equal_time: EqualTimeConvention,
}

impl<T: Real> CorrelationFunction<T> {
    pub fn get(&self, x: i64, y: i64, time_index: usize) -> Result<T> {
        let n = self.params.n_sites();
        let (i, j) = (self.params.offset(x)?, self.params.offset(y)?);
        Ok(self.values[(i * n + j) * self.times.len() + time_index])
    }

    pub fn time_index(&self, t: T) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }
}

/// `B[n, m] = <n| a⁺_x |m>` between eigenstates of sectors `N` and `N+1`,
/// kept only where the thermal weight can matter.
#[derive(Debug, Clone, Default)]
struct PairProjection<T> {
    /// For each low state `m` of sector `N`: the column over all `n`.
    cols: Vec<Vec<T>>,
    /// For each low state `n` of sector `N+1`: the row over all `m`.
    rows: Vec<Vec<T>>,
}

/// Lehmann-sum evaluator. Building it does the expensive projections once;
/// each evaluation is then a weighted dot product per sector pair.
pub struct Correlator<'a, T> {
    spectral: &'a SpectralDecomposition<T>,
    k: Vec<Vec<T>>,
    low: Vec<Vec<usize>>,
    is_low: Vec<Vec<bool>>,
    /// `proj[site][N]`
    proj: Vec<Vec<PairProjection<T>>>,
    /// `rho[y][x] = <a⁺_y a_x>`
    rho: SquareMatrix<T>,
}

fn apply<T: Real>(
    from: &FockSector,
    to: &FockSector,
    v: &[T],
    op: fn(u64, usize) -> Option<(u64, bool)>,
    bit: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); to.len()];
    for (k, &mask) in from.states.iter().enumerate() {
        if let Some((m2, negative)) = op(mask, bit) {
            let idx = to.index_of(m2).expect("target sector matches particle number");
            out[idx] = if negative { -v[k] } else { v[k] };
        }
    }
    out
}

impl<'a, T: Real> Correlator<'a, T> {
    pub fn new(spectral: &'a SpectralDecomposition<T>) -> Result<Self> {
        let n_sectors = spectral.sectors.len();
        let n_sites = spectral.params.n_sites();
        let k: Vec<Vec<T>> = (0..n_sectors).map(|n| spectral.shifted_energies(n)).collect();
        let low: Vec<Vec<usize>> = (0..n_sectors).map(|n| spectral.low_states(n)).collect();
        let is_low: Vec<Vec<bool>> = low
            .iter()
            .zip(&k)
            .map(|(l, k)| {
                let mut flags = vec![false; k.len()];
                l.iter().for_each(|&i| flags[i] = true);
                flags
            })
            .collect();
        for n in 0..n_sectors {
            if !low[n].is_empty() {
                spectral.vectors(n)?;
                if n > 0 {
                    spectral.vectors(n - 1)?;
                }
                if n + 1 < n_sectors {
                    spectral.vectors(n + 1)?;
                }
            }
        }
        let proj = (0..n_sites)
            .into_par_iter()
            .map(|bit| {
                (0..n_sectors - 1)
                    .map(|n| Self::project_pair(spectral, &low, n, bit))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let rho = Self::one_body_density(spectral, &k, &low)?;
        Ok(Self { spectral, k, low, is_low, proj, rho })
    }

    fn project_pair(
        spectral: &SpectralDecomposition<T>,
        low: &[Vec<usize>],
        n: usize,
        bit: usize,
    ) -> Result<PairProjection<T>> {
        if low[n].is_empty() && low[n + 1].is_empty() {
            return Ok(PairProjection::default());
        }
        let (lower, upper) = (&spectral.sectors[n].sector, &spectral.sectors[n + 1].sector);
        let (vl, vu) = (spectral.vectors(n)?, spectral.vectors(n + 1)?);
        let cols = low[n]
            .iter()
            .map(|&m| {
                let u = apply(lower, upper, &vl[m], create, bit);
                vu.iter().map(|w| dot(w, &u)).collect()
            })
            .collect();
        let rows = low[n + 1]
            .iter()
            .map(|&nn| {
                let u = apply(upper, lower, &vu[nn], annihilate, bit);
                vl.iter().map(|w| dot(w, &u)).collect()
            })
            .collect();
        Ok(PairProjection { cols, rows })
    }

    fn one_body_density(spectral: &SpectralDecomposition<T>, k: &[Vec<T>], low: &[Vec<usize>]) -> Result<SquareMatrix<T>> {
        let n_sites = spectral.params.n_sites();
        let beta = spectral.params.beta;
        let mut rho = SquareMatrix::zeros(n_sites);
        for n in 1..spectral.sectors.len() {
            if low[n].is_empty() {
                continue;
            }
            let (from, to) = (&spectral.sectors[n].sector, &spectral.sectors[n - 1].sector);
            let vecs = spectral.vectors(n)?;
            for &p in &low[n] {
                let w = (-beta * k[n][p]).exp() / spectral.z;
                let lowered: Vec<Vec<T>> = (0..n_sites).map(|b| apply(from, to, &vecs[p], annihilate, b)).collect();
                for y in 0..n_sites {
                    for x in 0..n_sites {
                        rho.add(y, x, w * dot(&lowered[y], &lowered[x]));
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.spectral.params
    }

    /// `<a⁺_y a_x>` by lattice site.
    pub fn one_body(&self, y: i64, x: i64) -> Result<T> {
        let p = self.params();
        Ok(self.rho.get(p.offset(y)?, p.offset(x)?))
    }

    /// `<n_x>` from the equal-time correlation.
    pub fn occupation(&self, x: i64) -> Result<T> {
        self.one_body(x, x)
    }

    pub fn density(&self) -> T {
        let n = self.params().n_sites();
        (0..n).map(|i| self.rho.get(i, i)).sum::<T>() / T::from_usize(n).unwrap()
    }

    /// `S(x, y, t) = <T a⁻_x(t) a⁺_y(0)>` for `|t| < β`.
    pub fn value(&self, x: i64, y: i64, t: T) -> Result<T> {
        let p = self.params();
        let (i, j) = (p.offset(x)?, p.offset(y)?);
        let beta = p.beta;
        if !t.is_finite() || t.abs() >= beta {
            return Err(Error::TimeOutOfRange { t: t.to_f64_lossy(), beta: beta.to_f64_lossy() });
        }
        if t == T::zero() {
            let delta = if i == j { T::c(0.5) } else { T::zero() };
            return Ok(delta - self.rho.get(j, i));
        }
        // weight e^{-a K_m - b K_n}, m in sector N, n in sector N+1
        let (a, b, sign) = if t > T::zero() { (beta - t, t, T::one()) } else { (-t, beta + t, -T::one()) };
        let mut total = T::zero();
        for n in 0..self.k.len() - 1 {
            let (px, py) = (&self.proj[i][n], &self.proj[j][n]);
            let (km, kn) = (&self.k[n], &self.k[n + 1]);
            let en: Vec<T> = kn.iter().map(|&e| (-b * e).exp()).collect();
            for (ci, &m) in self.low[n].iter().enumerate() {
                let em = (-a * km[m]).exp();
                let s: T = px.cols[ci].iter().zip(&py.cols[ci]).zip(&en).map(|((&u, &v), &w)| u * v * w).sum();
                total += em * s;
            }
            let em: Vec<T> = km.iter().map(|&e| (-a * e).exp()).collect();
            for (ri, &nn) in self.low[n + 1].iter().enumerate() {
                let s: T = px.rows[ri]
                    .iter()
                    .zip(&py.rows[ri])
                    .zip(&em)
                    .zip(&self.is_low[n])
                    .filter(|(_, &lowm)| !lowm)
                    .map(|(((&u, &v), &w), _)| u * v * w)
                    .sum();
                total += en[nn] * s;
            }
        }
        Ok(sign * total / self.spectral.z)
    }

    /// Tabulate all `(x, y)` pairs at the given times.
    pub fn table(&self, times: &[T]) -> Result<CorrelationFunction<T>> {
        let p = self.params();
        let sites: Vec<i64> = p.sites().collect();
        let pairs: Vec<(i64, i64)> = sites.iter().flat_map(|&x| sites.iter().map(move |&y| (x, y))).collect();
        let values: Vec<Vec<T>> = pairs
            .par_iter()
            .map(|&(x, y)| times.iter().map(|&t| self.value(x, y, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(CorrelationFunction {
            params: p.clone(),
            times: times.to_vec(),
            values: values.into_iter().flatten().collect(),
            equal_time: EqualTimeConvention::MeanOfLimits,
        })
    }
}

/// One-shot evaluation; build a [`Correlator`] when calling repeatedly.
pub fn two_point_function<T: Real>(spectral: &SpectralDecomposition<T>, x: i64, y: i64, t: T) -> Result<T> {
    Correlator::new(spectral)?.value(x, y, t)
}
