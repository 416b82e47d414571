//! Random field Ising model: exact oracles, self-avoiding walk tree
//! recursions with certified truncation, a deterministic approximation of
//! `log Z`, sequential and Glauber samplers, disagreement percolation and
//! seeded instance generators.

pub mod counting;
pub mod error;
pub mod glauber;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod percolation;
pub mod randgen;
pub mod rng;
pub mod sawtree;
pub mod spin;
pub mod stats;

pub use counting::{approx_partition, approx_sample, check_instance, CountOptions, CountResult, Depth};
pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{exact_marginal, exact_partition, influence_bound, IsingInstance};
pub use sawtree::{FrontierPolicy, SawTree};
pub use spin::{PartialConfig, Spin, SpinConfig};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
