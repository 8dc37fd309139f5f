//! Asynchronous multitask diffusion over clustered networks.
//!
//! The crate covers network topology, Bernoulli activation models with their
//! first and second moments, the adapt-then-combine recursion with Monte-Carlo
//! drivers, block Kronecker algebra, and the mean and mean-square theory.

pub mod activation;
pub mod blockops;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod sparse;
pub mod theory;

pub use activation::{
    verify_stochastic_moments, ActivationDraw, ActivationModel, BernoulliParams, FixedActivation, MomentSet,
    RandomWeight, StochasticityReport,
};
pub use blockops::{block_kron, bvec, unbvec, weighted_sq_norm, BlockMatrix};
pub use engine::{
    atc_step_async, atc_step_sync, run_monte_carlo, MonteCarloConfig, MsdCurve, NetworkState, RegressionFrame,
    SignalModel, Simulation, StreamingData,
};
pub use error::{Error, Result};
pub use network::{ClusteredNetwork, NeighborhoodView};
pub use sparse::SparseMatrix;
