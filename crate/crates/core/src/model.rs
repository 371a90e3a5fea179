//! The simulator contract every model implements.

use crate::error::Result;
use crate::models::PosteriorOracle;
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

/// Bijection between a model's natural parameter coordinates and the
/// unconstrained space the jump kernel moves in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reparam {
    Identity,
    /// Every coordinate lives in (0, 1); the kernel works on logit(θ).
    Logit,
}

impl Reparam {
    pub fn to_unconstrained(self, theta: &[f64]) -> Vec<f64> {
        match self {
            Reparam::Identity => theta.to_vec(),
            Reparam::Logit => theta.iter().map(|t| (t / (1.0 - t)).ln()).collect(),
        }
    }

    /// `None` when the image falls outside the representable support
    /// (e.g. the logistic saturates to exactly 0 or 1).
    pub fn from_unconstrained(self, phi: &[f64]) -> Option<Vec<f64>> {
        match self {
            Reparam::Identity => Some(phi.to_vec()),
            Reparam::Logit => phi
                .iter()
                .map(|p| {
                    let t = 1.0 / (1.0 + (-p).exp());
                    (t > 0.0 && t < 1.0).then_some(t)
                })
                .collect(),
        }
    }

    /// `ln |dθ/dφ|` evaluated at natural coordinates θ.
    pub fn log_jacobian(self, theta: &[f64]) -> f64 {
        match self {
            Reparam::Identity => 0.0,
            Reparam::Logit => theta.iter().map(|t| t.ln() + (1.0 - t).ln()).sum(),
        }
    }
}

/// A stochastic model known only through its simulator.
///
/// Implementations must be reproducible: identical rng state in, identical
/// output out. Nothing here ever evaluates the likelihood density.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter dimension d.
    fn dim(&self) -> usize;

    /// The observation y.
    fn data(&self) -> &OutputPoint;

    /// Draw x ~ L(·|θ).
    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint>;

    /// Draw θ ~ f_pri.
    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint;

    /// `ln f_pri(θ)`, `-inf` outside the support. Required for the general case.
    fn prior_log_density(&self, _theta: &ParameterPoint) -> Option<f64> {
        None
    }

    fn in_support(&self, _theta: &ParameterPoint) -> bool {
        true
    }

    fn reparam(&self) -> Reparam {
        Reparam::Identity
    }

    /// Whether the prior carries information (selects the two-temperature annealer).
    fn informative_prior(&self) -> bool {
        false
    }

    /// Exponent of the default power metric.
    fn alpha(&self) -> f64 {
        2.0
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        None
    }

    /// Finite parameter grid; when present, jumps are uniform over the grid.
    fn grid(&self) -> Option<&[f64]> {
        None
    }
}
