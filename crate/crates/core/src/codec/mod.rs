//! High-probability subspaces, ensembles and coding schemes.

pub mod coding;
pub mod ensemble;
pub mod experiment;
pub mod subspace;

pub use coding::{
    encode_pure, fidelity, fidelity_sqrt, optimal_encoder, theorem1_coding, CodingScheme, EncodedState,
};
pub use ensemble::{
    coarse_grain, extremal_ensemble, Ensemble, MixedMember, Mixer, PureEnsemble, PureMember, RANK_FLOOR,
};
pub use experiment::{
    beta_point, converse_chain, direct_chain, theorem1_experiment, theorem1_from_densities,
    theorem2_experiment, theorem2_from_densities, BetaPoint, Theorem, Theorem1Params, Theorem2Params,
    TheoremReport, TrialRecord, Verdict, CHAIN_TOL,
};
pub use subspace::{beta_dim, high_prob_subspace, hp_dimension, HighProbSubspace, Projector, HP_SLACK};
