//! Learned precoding for the real-valued MIMO Gaussian wiretap channel.
//!
//! The crate is organised bottom-up:
//!
//! - [`secrecy`]: secrecy-rate objective, its gradient, feasibility
//!   projections and the precoder/power factorization of a covariance.
//! - [`solver`]: classical covariance designs used as labels and baselines
//!   (projected-gradient ascent and GSVD precoding with secrecy water-filling).
//! - [`features`]: the 72-entry channel feature map and the 6-entry
//!   upper-triangular covariance codec.
//! - [`nn`]: a residual fully-connected PReLU regression network with Adam.
//! - [`dataset`]: seeded generation, binary storage and cascading of labelled
//!   channel sets.

mod binio;
pub mod dataset;
pub mod error;
pub mod features;
pub mod nn;
pub mod secrecy;
pub mod solver;

pub use error::{Error, Result};
pub use features::{decode_cov, encode_cov, encode_features, CovVector, FeatureVector};
pub use secrecy::{
    factorize_precoder, project_euclidean, project_feasible, rate_gradient, secrecy_rate,
    secrecy_rate_via_sylvester, ChannelPair, Covariance, PrecoderFactors,
};
pub use solver::{
    gsvd_precode, gsvd_subchannels, secrecy_waterfill, solve_covariance_pg, SolveOutcome,
    SolverConfig, SubchannelGains,
};
pub use dataset::{cascade_sets, generate_set, load_set, read_set, Dataset, DatasetHeader, DatasetRecord};
pub use nn::{NetArchitecture, Network, TrainSchedule, TrainingSet, Variant};
