//! Achievable rates for a two-relay network in which the receiver feeds back
//! to the transmitter and the relays compress-and-forward.
//!
//! * [`pmf`]: factored input distributions and dense joint tables.
//! * [`info`]: entropies and conditional mutual informations.
//! * [`region`]: the closed-form rate region and its stepwise linear systems.
//! * [`fme`]: exact Fourier-Motzkin elimination of those systems.
//! * [`optimize`]: search over input distributions.
//! * [`sim`]: Monte-Carlo simulation of the block-Markov coding scheme.

pub mod fme;
pub mod info;
pub mod optimize;
pub mod pmf;
pub mod region;
pub mod sim;

pub use fme::{check_against_theorem1, ComparisonRecord, InequalitySystem, LinearInequality, RateVar};
pub use info::{entropy, mutual_info, InfoCalculator, InfoError};
pub use pmf::{
    build_joint, Alphabets, Channel, ConditionalTable, FactoredNetworkDistribution, FreeFactor, JointPmf, PmfError,
    Var, VarSet,
};
pub use region::{
    compare_modes, info_vector, joint_decoding_system, stepwise_system, theorem1_verdict, InfoTermValues, JointReading,
    RegionError, RegionVerdict, Term,
};
