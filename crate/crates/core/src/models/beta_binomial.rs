use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous};

use super::PosteriorOracle;
use crate::error::{Result, SabcError};
use crate::model::{Model, Reparam};
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaBinomialParams {
    pub n_trials: u64,
    pub y_obs: u64,
    pub prior_a: f64,
    pub prior_b: f64,
}

impl Default for BetaBinomialParams {
    fn default() -> Self {
        Self {
            n_trials: 20,
            y_obs: 12,
            prior_a: 1.0,
            prior_b: 1.0,
        }
    }
}

/// Success probability of a binomial experiment under a Beta prior.
#[derive(Clone, Debug)]
pub struct BetaBinomial {
    params: BetaBinomialParams,
    prior: Beta,
    data: OutputPoint,
}

impl BetaBinomial {
    pub fn new(n_trials: u64, y_obs: u64, prior_a: f64, prior_b: f64) -> Result<Self> {
        Self::from_params(BetaBinomialParams {
            n_trials,
            y_obs,
            prior_a,
            prior_b,
        })
    }

    pub fn from_params(params: BetaBinomialParams) -> Result<Self> {
        if params.y_obs > params.n_trials {
            return Err(SabcError::InvalidModel(format!(
                "beta_binomial: y_obs {} exceeds n_trials {}",
                params.y_obs, params.n_trials
            )));
        }
        let prior = Beta::new(params.prior_a, params.prior_b).map_err(|e| {
            SabcError::InvalidModel(format!("beta_binomial: invalid prior: {e}"))
        })?;
        Ok(Self {
            data: OutputPoint::Count(params.y_obs),
            params,
            prior,
        })
    }

    pub fn params(&self) -> &BetaBinomialParams {
        &self.params
    }
}

impl Model for BetaBinomial {
    fn name(&self) -> &str {
        "beta_binomial"
    }

    fn dim(&self) -> usize {
        1
    }

    fn data(&self) -> &OutputPoint {
        &self.data
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
        let p = theta.coords()[0];
        let binom = Binomial::new(self.params.n_trials, p)
            .map_err(|e| SabcError::Simulator(format!("binomial({p}): {e}")))?;
        Ok(OutputPoint::Count(binom.sample(rng)))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
        let beta = rand_distr::Beta::new(self.params.prior_a, self.params.prior_b)
            .expect("validated at construction");
        loop {
            // the open interval is the support; endpoints can appear through rounding
            let t: f64 = beta.sample(rng);
            if t > 0.0 && t < 1.0 {
                return ParameterPoint::scalar(t);
            }
        }
    }

    fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
        let t = theta.coords()[0];
        Some(if self.in_support(theta) {
            self.prior.ln_pdf(t)
        } else {
            f64::NEG_INFINITY
        })
    }

    fn in_support(&self, theta: &ParameterPoint) -> bool {
        let t = theta.coords()[0];
        t > 0.0 && t < 1.0
    }

    fn reparam(&self) -> Reparam {
        Reparam::Logit
    }

    fn informative_prior(&self) -> bool {
        self.params.prior_a != 1.0 || self.params.prior_b != 1.0
    }

    fn alpha(&self) -> f64 {
        1.0
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        let p = &self.params;
        Some(PosteriorOracle::Beta {
            a: p.prior_a + p.y_obs as f64,
            b: p.prior_b + (p.n_trials - p.y_obs) as f64,
        })
    }
}
