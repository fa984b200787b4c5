use crate::error::Result;
use crate::linalg::SquareMatrix;
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::single_particle::tadpole_counterterm;

use super::fock::{annihilate, create, FockSector};

/// Which one-body counterterms sit on the diagonal. The chemical potential
/// itself always enters through the grand-canonical weight, never here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HamiltonianOptions {
    /// Add `U ν_C(x) n_x`.
    pub tadpole_counterterm: bool,
}

/// Symmetric matrix in coordinate form: full diagonal plus the upper
/// triangle of off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric<T> {
    pub dim: usize,
    pub diag: Vec<T>,
    pub upper: Vec<(usize, usize, T)>,
}

impl<T: Real> SparseSymmetric<T> {
    pub fn to_dense(&self) -> SquareMatrix<T> {
        let mut m = SquareMatrix::zeros(self.dim);
        for (i, &d) in self.diag.iter().enumerate() {
            m.set(i, i, d);
        }
        for &(i, j, v) in &self.upper {
            m.add(i, j, v);
            m.add(j, i, v);
        }
        m
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = self.diag.iter().zip(v).map(|(&d, &x)| d * x).collect();
        for &(i, j, a) in &self.upper {
            out[i] += a * v[j];
            out[j] += a * v[i];
        }
        out
    }
}

/// Hopping, quasi-periodic potential and nearest-neighbour interaction
/// restricted to one particle-number sector. Each bond carries `2U` since
/// the pair potential is summed over ordered pairs.
pub fn build_hamiltonian<T: Real>(
    params: &ModelParams<T>,
    sector: &FockSector,
    options: HamiltonianOptions,
) -> Result<SparseSymmetric<T>> {
    params.validate()?;
    let n = params.n_sites();
    let mut onsite: Vec<T> = params.sites().map(|x| params.potential(x)).collect();
    if options.tadpole_counterterm {
        for (i, x) in params.sites().enumerate() {
            onsite[i] += tadpole_counterterm(params, x)?;
        }
    }
    let bond = T::c(2.0) * params.interaction;
    let mut diag = Vec::with_capacity(sector.len());
    let mut upper = Vec::new();
    for (col, &mask) in sector.states.iter().enumerate() {
        let mut e = T::zero();
        for (i, &phi) in onsite.iter().enumerate() {
            if mask >> i & 1 == 1 {
                e += phi;
                if i + 1 < n && mask >> (i + 1) & 1 == 1 {
                    e += bond;
                }
            }
        }
        diag.push(e);
        if params.hopping != T::zero() {
            // a⁺_{i+1} a_i and its adjoint; only emit the upper triangle
            for i in 0..n.saturating_sub(1) {
                for (from, to) in [(i, i + 1), (i + 1, i)] {
                    let Some((m1, s1)) = annihilate(mask, from) else { continue };
                    let Some((m2, s2)) = create(m1, to) else { continue };
                    let row = sector.index_of(m2).expect("hopping preserves particle number");
                    if row < col {
                        let sign = if s1 ^ s2 { -T::one() } else { T::one() };
                        upper.push((row, col, -params.hopping * sign));
                    }
                }
            }
        }
    }
    Ok(SparseSymmetric { dim: sector.len(), diag, upper })
}
