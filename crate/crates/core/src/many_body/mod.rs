//! Exact diagonalization of the interacting chain in the grand-canonical
//! ensemble and the imaginary-time two-point function in Lehmann form.

pub mod correlation;
pub mod fock;
pub mod hamiltonian;
pub mod spectral;

pub use correlation::{two_point_function, CorrelationFunction, Correlator, EqualTimeConvention};
pub use fock::{enumerate_sector, FockSector};
pub use hamiltonian::{build_hamiltonian, HamiltonianOptions, SparseSymmetric};
pub use spectral::{density, SectorSpectrum, SpectralDecomposition, VectorPolicy};
