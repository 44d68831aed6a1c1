//! Finitely correlated quantum sources: block densities, mean entropy and
//! high-probability-subspace compression.

pub mod codec;
pub mod density;
pub mod entropy;
mod error;
pub mod format;
pub mod source;
pub mod tensor;

pub use codec::{
    high_prob_subspace, theorem1_experiment, theorem2_experiment, HighProbSubspace, Projector, TheoremReport,
};
pub use density::DensityMatrix;
pub use entropy::{mean_entropy_trace, von_neumann_entropy, EntropyTrace, Units};
pub use error::{Error, Result};
pub use source::{
    example1_source, fcs_density, product_density, random_source, validate_source, KrausSource, SourceModel,
    DEFAULT_SIZE_CAP,
};
pub use tensor::{CMatrix, CVector, EigenSystem};

pub use nalgebra;
pub use num_complex;
