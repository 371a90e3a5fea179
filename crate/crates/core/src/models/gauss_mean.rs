use serde::{Deserialize, Serialize};

use super::PosteriorOracle;
use crate::error::{Result, SabcError};
use crate::model::Model;
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussMeanParams {
    pub sigma_obs: f64,
    pub n_obs: usize,
    pub y_bar: f64,
    pub prior_halfwidth: f64,
    /// Emit the individual draws instead of their mean.
    pub raw_output: bool,
}

impl Default for GaussMeanParams {
    fn default() -> Self {
        Self {
            sigma_obs: 1.0,
            n_obs: 5,
            y_bar: 0.0,
            prior_halfwidth: 10.0,
            raw_output: false,
        }
    }
}

/// Unknown mean of `n_obs` normal draws with known spread, flat box prior.
#[derive(Clone, Debug)]
pub struct GaussMean {
    params: GaussMeanParams,
    data: OutputPoint,
}

impl GaussMean {
    pub fn new(sigma_obs: f64, n_obs: usize, y_bar: f64, prior_halfwidth: f64) -> Result<Self> {
        Self::from_params(GaussMeanParams {
            sigma_obs,
            n_obs,
            y_bar,
            prior_halfwidth,
            raw_output: false,
        })
    }

    pub fn from_params(params: GaussMeanParams) -> Result<Self> {
        if !(params.sigma_obs > 0.0) {
            return Err(SabcError::InvalidModel(format!(
                "gauss_mean: sigma_obs must be > 0, got {}",
                params.sigma_obs
            )));
        }
        if params.n_obs == 0 {
            return Err(SabcError::InvalidModel("gauss_mean: n_obs must be >= 1".into()));
        }
        if !(params.prior_halfwidth > 0.0) || !params.y_bar.is_finite() {
            return Err(SabcError::InvalidModel(
                "gauss_mean: prior_halfwidth must be > 0 and y_bar finite".into(),
            ));
        }
        let data = if params.raw_output {
            OutputPoint::Continuous(vec![params.y_bar; params.n_obs])
        } else {
            OutputPoint::Continuous(vec![params.y_bar])
        };
        Ok(Self { params, data })
    }

    pub fn params(&self) -> &GaussMeanParams {
        &self.params
    }
}

impl Model for GaussMean {
    fn name(&self) -> &str {
        "gauss_mean"
    }

    fn dim(&self) -> usize {
        1
    }

    fn data(&self) -> &OutputPoint {
        &self.data
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
        let mu = theta.coords()[0];
        let p = &self.params;
        let draws = (0..p.n_obs).map(|_| mu + p.sigma_obs * rng.normal());
        Ok(OutputPoint::Continuous(if p.raw_output {
            draws.collect()
        } else {
            vec![draws.sum::<f64>() / p.n_obs as f64]
        }))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
        let h = self.params.prior_halfwidth;
        ParameterPoint::scalar(-h + 2.0 * h * rng.uniform())
    }

    fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
        Some(if self.in_support(theta) {
            -(2.0 * self.params.prior_halfwidth).ln()
        } else {
            f64::NEG_INFINITY
        })
    }

    fn in_support(&self, theta: &ParameterPoint) -> bool {
        theta.coords()[0].abs() <= self.params.prior_halfwidth
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        let p = &self.params;
        Some(PosteriorOracle::TruncatedNormal {
            mean: p.y_bar,
            sd: p.sigma_obs / (p.n_obs as f64).sqrt(),
            lo: -p.prior_halfwidth,
            hi: p.prior_halfwidth,
        })
    }
}
