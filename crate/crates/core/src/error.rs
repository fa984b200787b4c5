use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("rational frequency: expansion terminates or partial quotient {quotient} exceeds {limit} at depth {depth}")]
    RationalFrequency { depth: usize, quotient: String, limit: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("imaginary time {t} outside the open interval (-beta, beta) with beta = {beta}")]
    TimeOutOfRange { t: f64, beta: f64 },

    #[error("transfer matrix undefined for zero hopping")]
    ZeroHopping,

    #[error("localization fit needs at least 4 sites above threshold, found {found}")]
    TooFewSites { found: usize },

    #[error("quadrature did not converge: estimated error {estimate:e} after {intervals} subdivisions")]
    Quadrature { estimate: f64, intervals: usize },

    #[error("cutoff supports around the two Fermi points overlap: a = {a} but must stay below {bound}")]
    SupportOverlap { a: f64, bound: f64 },

    #[error("zero divisor at resonant site {site} (k0 = 0 on the Fermi pair)")]
    ZeroDivisor { site: i64 },

    #[error("site {site} outside the lattice [-{half}, {half}]")]
    SiteOutOfLattice { site: i64, half: i64 },

    #[error("spectral data incomplete: sector with {n_particles} particles missing")]
    IncompleteSpectrum { n_particles: usize },

    #[error("spectral data carries eigenvalues only; eigenvectors are required")]
    MissingEigenvectors,

    #[error("no sign change of density mismatch on [{lo}, {hi}] (values {f_lo:e}, {f_hi:e})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("eigensolver failed to converge for eigenvalue {index}")]
    NoConvergence { index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
