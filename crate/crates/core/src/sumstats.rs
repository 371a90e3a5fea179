//! Linear summary statistics fitted on pilot prior-predictive draws.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};
use crate::model::{Model, Reparam};
use crate::models::PosteriorOracle;
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

const RIDGE: f64 = 1e-6;
const RANK_TOL: f64 = 1e-12;

/// Affine projection `x ↦ (b_j · [1, x])_j` of outputs to parameter dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryMap {
    /// One row per parameter component: intercept followed by output weights.
    pub coefficients: Vec<Vec<f64>>,
    /// The design was rank-deficient and a ridge penalty was added.
    pub ridge: bool,
}

impl SummaryMap {
    pub fn input_dim(&self) -> usize {
        self.coefficients.first().map_or(0, |c| c.len() - 1)
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn apply(&self, x: &OutputPoint) -> Result<OutputPoint> {
        apply_summaries(self, x)
    }
}

/// Least-squares regression of each parameter component on `[1, x]`.
///
/// Needs at least `10 (n + 1)` pilot draws for output dimension `n`. A
/// rank-deficient design falls back to a ridge penalty of `1e-6` and is
/// flagged in the returned map.
pub fn fit_linear_summaries(thetas: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<SummaryMap> {
    if thetas.len() != outputs.len() {
        return Err(SabcError::DimensionMismatch {
            expected: thetas.len(),
            got: outputs.len(),
        });
    }
    let (Some(t0), Some(x0)) = (thetas.first(), outputs.first()) else {
        return Err(SabcError::EmptyInput("summary fit needs pilot draws"));
    };
    let (p, d, n) = (thetas.len(), t0.len(), x0.len());
    if p < 10 * (n + 1) {
        return Err(SabcError::InvalidArgument(format!(
            "summary fit needs at least {} pilot draws for output dimension {n}, got {p}",
            10 * (n + 1)
        )));
    }
    for (t, x) in thetas.iter().zip(outputs) {
        if t.len() != d || x.len() != n {
            return Err(SabcError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
    }

    let design = DMatrix::from_fn(p, n + 1, |i, j| if j == 0 { 1.0 } else { outputs[i][j - 1] });
    let targets = DMatrix::from_fn(p, d, |i, j| thetas[i][j]);
    let mut gram = design.transpose() * &design;
    let rhs = design.transpose() * &targets;

    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let ridge = !(lo > RANK_TOL * hi);
    if ridge {
        warn!("summary design is rank-deficient; adding ridge penalty {RIDGE}");
        for i in 0..=n {
            gram[(i, i)] += RIDGE;
        }
    }
    let beta = gram
        .cholesky()
        .ok_or(SabcError::IllConditioned(hi / lo.max(f64::MIN_POSITIVE)))?
        .solve(&rhs);
    Ok(SummaryMap {
        coefficients: (0..d)
            .map(|j| beta.column(j).iter().cloned().collect())
            .collect(),
        ridge,
    })
}

/// Project an output through the fitted map.
pub fn apply_summaries(map: &SummaryMap, x: &OutputPoint) -> Result<OutputPoint> {
    let v = x.to_vec();
    if v.len() != map.input_dim() {
        return Err(SabcError::DimensionMismatch {
            expected: map.input_dim(),
            got: v.len(),
        });
    }
    let xv = DVector::from_vec(v);
    Ok(OutputPoint::Continuous(
        map.coefficients
            .iter()
            .map(|c| c[0] + DVector::from_column_slice(&c[1..]).dot(&xv))
            .collect(),
    ))
}

/// A model whose outputs are replaced by their summaries.
pub struct SummarizedModel<'a> {
    inner: &'a dyn Model,
    map: SummaryMap,
    data: OutputPoint,
}

impl<'a> SummarizedModel<'a> {
    pub fn new(inner: &'a dyn Model, map: SummaryMap) -> Result<Self> {
        let data = map.apply(inner.data())?;
        Ok(Self { inner, map, data })
    }
}

impl Model for SummarizedModel<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn data(&self) -> &OutputPoint {
        &self.data
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
        self.map.apply(&self.inner.simulate(theta, rng)?)
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
        self.inner.prior_sample(rng)
    }

    fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
        self.inner.prior_log_density(theta)
    }

    fn in_support(&self, theta: &ParameterPoint) -> bool {
        self.inner.in_support(theta)
    }

    fn reparam(&self) -> Reparam {
        self.inner.reparam()
    }

    fn informative_prior(&self) -> bool {
        self.inner.informative_prior()
    }

    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        self.inner.posterior_oracle()
    }

    fn grid(&self) -> Option<&[f64]> {
        self.inner.grid()
    }
}
