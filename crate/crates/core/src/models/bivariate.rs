use serde::{Deserialize, Serialize};

use super::PosteriorOracle;
use crate::error::{Result, SabcError};
use crate::model::Model;
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BivariateGaussParams {
    pub sigma: [f64; 2],
    /// Correlation of the likelihood.
    pub rho_l: f64,
    pub data: [f64; 2],
    pub prior_halfwidth: f64,
}

impl Default for BivariateGaussParams {
    fn default() -> Self {
        Self {
            sigma: [1.0, 1.0],
            rho_l: 0.7,
            data: [0.0, 0.0],
            prior_halfwidth: 10.0,
        }
    }
}

/// Location of a correlated 2-d Gaussian observed once, flat box prior.
#[derive(Clone, Debug)]
pub struct BivariateGauss {
    params: BivariateGaussParams,
    data: OutputPoint,
}

impl BivariateGauss {
    pub fn from_params(params: BivariateGaussParams) -> Result<Self> {
        if !(params.sigma[0] > 0.0 && params.sigma[1] > 0.0) {
            return Err(SabcError::InvalidModel("bivariate_gauss: sigma must be > 0".into()));
        }
        if !(params.rho_l.abs() < 1.0) {
            return Err(SabcError::InvalidModel(
                "bivariate_gauss: |rho_l| must be < 1".into(),
            ));
        }
        let h = params.prior_halfwidth;
        if !(h > 0.0) || params.data.iter().any(|d| d.abs() > h) {
            return Err(SabcError::InvalidModel(
                "bivariate_gauss: data must lie inside the prior box".into(),
            ));
        }
        Ok(Self {
            data: OutputPoint::Continuous(params.data.to_vec()),
            params,
        })
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let [s0, s1] = self.params.sigma;
        let c = self.params.rho_l * s0 * s1;
        [[s0 * s0, c], [c, s1 * s1]]
    }
}

impl Model for BivariateGauss {
    fn name(&self) -> &str {
        "bivariate_gauss"
    }

    fn dim(&self) -> usize {
        2
    }

    fn data(&self) -> &OutputPoint {
        &self.data
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
        let t = theta.coords();
        let [s0, s1] = self.params.sigma;
        let r = self.params.rho_l;
        let (z0, z1) = (rng.normal(), rng.normal());
        Ok(OutputPoint::Continuous(vec![
            t[0] + s0 * z0,
            t[1] + s1 * (r * z0 + (1.0 - r * r).sqrt() * z1),
        ]))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
        let h = self.params.prior_halfwidth;
        ParameterPoint::new(vec![
            -h + 2.0 * h * rng.uniform(),
            -h + 2.0 * h * rng.uniform(),
        ])
    }

    fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
        Some(if self.in_support(theta) {
            -2.0 * (2.0 * self.params.prior_halfwidth).ln()
        } else {
            f64::NEG_INFINITY
        })
    }

    fn in_support(&self, theta: &ParameterPoint) -> bool {
        theta
            .coords()
            .iter()
            .all(|c| c.abs() <= self.params.prior_halfwidth)
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        Some(PosteriorOracle::BivariateNormal {
            mean: self.params.data,
            cov: self.covariance(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::sample_covariance;

    #[test]
    fn posterior_mean_is_the_data() {
        let m = BivariateGauss::from_params(BivariateGaussParams {
            data: [1.5, -2.0],
            ..Default::default()
        })
        .unwrap();
        let o = m.posterior_oracle().unwrap();
        assert_eq!((o.mean(0), o.mean(1)), (1.5, -2.0));
        assert!((o.correlation().unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn simulated_covariance() {
        let m = BivariateGauss::from_params(BivariateGaussParams {
            sigma: [1.0, 2.0],
            rho_l: -0.6,
            ..Default::default()
        })
        .unwrap();
        let t = ParameterPoint::new(vec![0.5, 0.5]);
        let mut rng = RngStream::from_seed(21);
        let xs: Vec<Vec<f64>> = (0..100_000)
            .map(|_| m.simulate(&t, &mut rng).unwrap().to_vec())
            .collect();
        let c = sample_covariance(&xs).unwrap();
        let want = m.covariance();
        for i in 0..2 {
            for j in 0..2 {
                let tol = 0.03 * (want[i][i] * want[j][j]).sqrt();
                assert!((c[(i, j)] - want[i][j]).abs() < tol, "({i},{j}) {c}");
            }
        }
    }

    #[test]
    fn rejects_bad_correlation() {
        assert!(BivariateGauss::from_params(BivariateGaussParams {
            rho_l: 1.0,
            ..Default::default()
        })
        .is_err());
    }
}
