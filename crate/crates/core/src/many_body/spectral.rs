use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricEigen;
use crate::model::ModelParams;
use crate::scalar::Real;

use super::fock::{enumerate_sector, FockSector};
use super::hamiltonian::{build_hamiltonian, HamiltonianOptions};

/// Largest chain handled by dense exact diagonalization.
pub const MAX_ED_SITES: usize = 16;

/// States with `β K > THERMAL_CUTOFF` carry relative weight below `e^{-60}`
/// and are dropped from thermal sums.
pub const THERMAL_CUTOFF: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VectorPolicy {
    /// Eigenvalues only; enough for partition functions and `<N>`.
    ValuesOnly,
    /// Eigenvectors for every sector that holds a thermally relevant state,
    /// and for its neighbours in particle number.
    #[default]
    Thermal,
    All,
}

#[derive(Debug, Clone)]
pub struct SectorSpectrum<T> {
    pub sector: FockSector,
    /// Eigenvalues of `H` (without `-μN`), ascending.
    pub energies: Vec<T>,
    /// Eigenvectors as rows, aligned with `energies`.
    pub vectors: Option<Vec<Vec<T>>>,
}

/// Complete grand-canonical spectral data of the chain.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    pub params: ModelParams<T>,
    pub options: HamiltonianOptions,
    pub sectors: Vec<SectorSpectrum<T>>,
    /// Global minimum of `E - μN`, subtracted before exponentiating.
    pub shift: T,
    /// Partition function of the shifted spectrum; at least 1.
    pub z: T,
}

fn diagonalize<T: Real>(
    params: &ModelParams<T>,
    sector: &FockSector,
    options: HamiltonianOptions,
    vectors: bool,
) -> Result<SectorSpectrum<T>> {
    let h = build_hamiltonian(params, sector, options)?.to_dense();
    let eig = if vectors { SymmetricEigen::new(&h)? } else { SymmetricEigen::values_only(&h)? };
    Ok(SectorSpectrum { sector: sector.clone(), energies: eig.values, vectors: eig.vectors })
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn compute(params: &ModelParams<T>, options: HamiltonianOptions, policy: VectorPolicy) -> Result<Self> {
        params.validate()?;
        let n_sites = params.n_sites();
        if n_sites > MAX_ED_SITES {
            return Err(Error::invalid("L", "exact diagonalization supports at most 16 sites"));
        }
        let sectors: Vec<FockSector> = (0..=n_sites).map(|n| enumerate_sector(params.l, n)).collect::<Result<_>>()?;
        let first_pass = policy == VectorPolicy::All;
        let mut spectra: Vec<SectorSpectrum<T>> =
            sectors.par_iter().map(|s| diagonalize(params, s, options, first_pass)).collect::<Result<_>>()?;
        let mut out = Self::assemble(params.clone(), options, spectra.clone());
        if policy == VectorPolicy::Thermal {
            let needed = out.thermally_needed();
            spectra = sectors
                .par_iter()
                .zip(spectra.into_par_iter())
                .zip(needed.par_iter())
                .map(|((s, spec), &need)| if need { diagonalize(params, s, options, true) } else { Ok(spec) })
                .collect::<Result<_>>()?;
            out = Self::assemble(params.clone(), options, spectra);
        }
        Ok(out)
    }

    fn assemble(params: ModelParams<T>, options: HamiltonianOptions, sectors: Vec<SectorSpectrum<T>>) -> Self {
        let mut out = Self { params, options, sectors, shift: T::zero(), z: T::one() };
        out.reweight();
        out
    }

    /// Same spectrum with a different counterterm `ν`. The Hamiltonian does
    /// not depend on `ν`, so only the weights change.
    pub fn with_nu(&self, nu: T) -> Self {
        let mut out = self.clone();
        out.params.nu = nu;
        out.reweight();
        out
    }

    fn reweight(&mut self) {
        let mu = self.params.mu();
        self.shift = self
            .sectors
            .iter()
            .map(|s| s.energies[0] - mu * T::from_usize(s.sector.n_particles).unwrap())
            .fold(T::infinity(), T::min);
        let beta = self.params.beta;
        let z: T = self
            .sectors
            .iter()
            .map(|s| s.energies.iter().map(|&e| (-beta * self.k(s, e)).exp()).sum::<T>())
            .sum();
        self.z = z;
    }

    fn k(&self, s: &SectorSpectrum<T>, e: T) -> T {
        e - self.params.mu() * T::from_usize(s.sector.n_particles).unwrap() - self.shift
    }

    /// Shifted grand-canonical energies `E - μN - shift` of one sector.
    pub fn shifted_energies(&self, n: usize) -> Vec<T> {
        let s = &self.sectors[n];
        s.energies.iter().map(|&e| self.k(s, e)).collect()
    }

    /// Whether the thermal sums need eigenvectors of each sector.
    fn thermally_needed(&self) -> Vec<bool> {
        let active: Vec<bool> = (0..self.sectors.len()).map(|n| !self.low_states(n).is_empty()).collect();
        (0..active.len())
            .map(|n| active[n] || (n > 0 && active[n - 1]) || active.get(n + 1).copied().unwrap_or(false))
            .collect()
    }

    /// Indices of states in sector `n` whose Boltzmann factor survives the
    /// thermal cutoff.
    pub fn low_states(&self, n: usize) -> Vec<usize> {
        let cut = T::c(THERMAL_CUTOFF);
        self.shifted_energies(n).iter().enumerate().filter(|(_, &k)| self.params.beta * k <= cut).map(|(i, _)| i).collect()
    }

    pub fn vectors(&self, n: usize) -> Result<&[Vec<T>]> {
        self.sectors[n].vectors.as_deref().ok_or(Error::IncompleteSpectrum { n_particles: n })
    }

    /// Probability of each particle number; sums to 1.
    pub fn sector_probabilities(&self) -> Vec<T> {
        let beta = self.params.beta;
        self.sectors
            .iter()
            .map(|s| s.energies.iter().map(|&e| (-beta * self.k(s, e)).exp()).sum::<T>() / self.z)
            .collect()
    }

    pub fn mean_particle_number(&self) -> T {
        self.sector_probabilities().iter().enumerate().map(|(n, &p)| T::from_usize(n).unwrap() * p).sum()
    }

    /// Filling fraction `<N> / (L + 1)` from the sector weights.
    pub fn density(&self) -> T {
        self.mean_particle_number() / T::from_usize(self.params.n_sites()).unwrap()
    }

    /// Largest residual `‖Hv − Ev‖ / ‖H‖` over all stored eigenpairs.
    pub fn max_relative_residual(&self) -> Result<T> {
        let mut worst = T::zero();
        for s in &self.sectors {
            let Some(vecs) = &s.vectors else { continue };
            let h = build_hamiltonian(&self.params, &s.sector, self.options)?;
            let norm = h.to_dense().norm().max(T::min_positive_value());
            for (e, v) in s.energies.iter().zip(vecs) {
                let hv = h.mul_vec(v);
                let r = hv.iter().zip(v).map(|(&a, &b)| (a - *e * b).powi(2)).sum::<T>().sqrt();
                worst = worst.max(r / norm);
            }
        }
        Ok(worst)
    }
}

/// Filling fraction as a function of `ν`, sharing one diagonalization.
pub fn density<T: Real>(spectral: &SpectralDecomposition<T>) -> T {
    spectral.density()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_function_and_probabilities() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.2).with_interaction(0.1).with_beta(10.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::All).unwrap();
        assert!(sp.z >= 1.0 && sp.z.is_finite());
        let total: f64 = sp.sector_probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(sp.max_relative_residual().unwrap() < 1e-9);
    }

    #[test]
    fn shift_leaves_observables_unchanged() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.2).with_interaction(0.1).with_beta(3.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::ValuesOnly).unwrap();
        // Unshifted reference with plain exponentials
        let mu = p.mu();
        let (mut z, mut n) = (0.0, 0.0);
        for s in &sp.sectors {
            for &e in &s.energies {
                let w = (-p.beta * (e - mu * s.sector.n_particles as f64)).exp();
                z += w;
                n += w * s.sector.n_particles as f64;
            }
        }
        assert!((sp.mean_particle_number() - n / z).abs() < 1e-12);
    }

    #[test]
    fn extreme_chemical_potentials() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.1).with_beta(40.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::ValuesOnly).unwrap();
        let empty = sp.with_nu(-5.0 - p.mu0());
        assert!(empty.density() < 1e-12);
        let full = sp.with_nu(5.0 - p.mu0());
        assert!((full.density() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_monotone_in_nu() {
        let p = ModelParams::<f64>::new(6).with_hopping(0.2).with_interaction(0.3).with_beta(8.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::ValuesOnly).unwrap();
        let mut last = -1.0;
        for k in 0..200 {
            let d = sp.with_nu(-3.0 + 0.03 * k as f64).density();
            assert!(d >= last - 1e-14);
            last = d;
        }
    }

    #[test]
    fn thermal_policy_keeps_neighbouring_vectors() {
        let p = ModelParams::<f64>::new(8).with_hopping(0.1).with_interaction(0.1).with_beta(24.0);
        let sp = SpectralDecomposition::compute(&p, HamiltonianOptions::default(), VectorPolicy::Thermal).unwrap();
        for n in 0..sp.sectors.len() {
            if !sp.low_states(n).is_empty() {
                assert!(sp.vectors(n).is_ok());
                if n + 1 < sp.sectors.len() {
                    assert!(sp.vectors(n + 1).is_ok());
                }
            }
        }
        assert!(sp.sectors.iter().any(|s| s.vectors.is_none()));
    }
}
