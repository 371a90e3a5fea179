//! Simulated-annealing approximate Bayesian computation.
//!
//! An ensemble of particles in parameter × output space is cooled toward the
//! posterior by a Metropolis dynamics that only ever *simulates* the model.
//! The cooling schedule is chosen adaptively so that entropy production, the
//! thermodynamic measure of wasted simulation effort, stays small.
//!
//! Two annealers are provided:
//!
//! - [`flat`]: negligible prior knowledge. Distances are mapped through an
//!   empirical transform to energies uniform under the prior predictive, so the
//!   ensemble temperature is just its mean energy.
//! - [`general`]: informative prior. A second energy `-ln f_pri(θ)` with its own
//!   temperature, held near unity by a counter force, while the data temperature
//!   is lowered at constant entropy production rate.

pub mod baselines;
pub mod config;
pub mod error;
pub mod flat;
pub mod general;
pub mod kernel;
pub mod metric;
pub mod model;
pub mod models;
pub mod output;
pub mod rng;
pub mod stats;
pub mod sumstats;
mod sweep;
pub mod thermo;
pub mod types;

pub use config::{ProposalKind, RunConfig, SummaryMode};
pub use error::{Result, SabcError};
pub use kernel::{JumpKernel, Proposal};
pub use metric::{rho_power, EnergyTransform};
pub use model::{Model, Reparam};
pub use models::{ModelSpec, PosteriorOracle};
pub use rng::RngStream;
pub use sweep::SweepStats;
pub use thermo::{OnsagerMatrix, ThermoState, TraceFlags};
pub use types::{Ensemble, OutputPoint, ParameterPoint, Particle};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
