use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |h - h*| = {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("Hermitian eigensolver did not converge on a {dim}x{dim} matrix")]
    ConvergenceFailure { dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("block dimension {site_dim}^{n_sites} exceeds size cap {cap}")]
    SizeCapExceeded {
        site_dim: usize,
        n_sites: usize,
        cap: usize,
    },

    #[error("invalid Kraus source: {0}")]
    InvalidSource(String),

    #[error("stationary auxiliary state not found: {0}")]
    FixedPointNotUnique(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid probability weights: {0}")]
    InvalidWeights(String),

    #[error("mixer columns are not orthonormal or do not match the rank: {0}")]
    BadMixer(String),

    #[error("ensemble has {ensemble} members but the coding has {codes} codes")]
    LengthMismatch { ensemble: usize, codes: usize },

    #[error("level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("subspace rank floor(exp(n (h - delta))) = {rank} is below 1 (n = {n}, h = {h}, delta = {delta})")]
    RankUnderflow {
        rank: f64,
        n: usize,
        h: f64,
        delta: f64,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
