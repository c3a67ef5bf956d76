//! Nearest-neighbour ball probabilities of i.i.d. samples from known
//! densities, with Monte Carlo checks of their extreme-value limit laws and
//! non-asymptotic tail bounds.
//!
//! * [`model`]: distributions and exact ball-probability kernels.
//! * [`geometry`]: nearest-neighbour radii and the statistics built on them.
//! * [`simulate`]: replicated experiments, reference laws and verifiers.
//! * [`conditions`]: numerical checks of the density conditions.
//! * [`cli`]: configuration, orchestration and report files.

pub mod cli;
pub mod conditions;
pub mod error;
pub mod geometry;
pub mod model;
pub mod report;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use model::DistributionModel;
