//! Bundled test models with exact posteriors.

mod beta_binomial;
mod bivariate;
mod finite_chain;
mod gauss_mean;
mod oracle;

use serde::{Deserialize, Serialize};

pub use beta_binomial::{BetaBinomial, BetaBinomialParams};
pub use bivariate::{BivariateGauss, BivariateGaussParams};
pub use finite_chain::{
    build_transition_matrix, stationary_distribution, FiniteChain, FiniteChainSpec,
};
pub use gauss_mean::{GaussMean, GaussMeanParams};
pub use oracle::PosteriorOracle;

use crate::error::Result;
use crate::model::Model;

/// Registry names accepted by [`ModelSpec::from_name`].
pub const MODEL_NAMES: [&str; 4] = ["gauss_mean", "beta_binomial", "bivariate_gauss", "finite_chain"];

/// A bundled model selected by name, with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    GaussMean(GaussMeanParams),
    BetaBinomial(BetaBinomialParams),
    BivariateGauss(BivariateGaussParams),
    FiniteChain(FiniteChainSpec),
}

impl ModelSpec {
    /// The named model with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "gauss_mean" => ModelSpec::GaussMean(Default::default()),
            "beta_binomial" => ModelSpec::BetaBinomial(Default::default()),
            "bivariate_gauss" => ModelSpec::BivariateGauss(Default::default()),
            "finite_chain" => ModelSpec::FiniteChain(Default::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::GaussMean(_) => "gauss_mean",
            ModelSpec::BetaBinomial(_) => "beta_binomial",
            ModelSpec::BivariateGauss(_) => "bivariate_gauss",
            ModelSpec::FiniteChain(_) => "finite_chain",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Model>> {
        Ok(match self {
            ModelSpec::GaussMean(p) => Box::new(GaussMean::from_params(p.clone())?),
            ModelSpec::BetaBinomial(p) => Box::new(BetaBinomial::from_params(p.clone())?),
            ModelSpec::BivariateGauss(p) => Box::new(BivariateGauss::from_params(p.clone())?),
            ModelSpec::FiniteChain(p) => Box::new(FiniteChain::new(p.clone())?),
        })
    }
}
