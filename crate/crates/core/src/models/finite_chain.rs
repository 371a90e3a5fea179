//! A finite (θ, x) chain on which the annealer's Markov kernel can be
//! enumerated exactly.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use super::PosteriorOracle;
use crate::error::{Result, SabcError};
use crate::model::Model;
use crate::rng::RngStream;
use crate::types::{OutputPoint, ParameterPoint};

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteChainSpec {
    pub theta_grid: Vec<f64>,
    pub output_grid: Vec<f64>,
    /// `likelihood_table[k][j]` = L(output_grid[j] | theta_grid[k]).
    pub likelihood_table: Vec<Vec<f64>>,
    pub prior_weights: Vec<f64>,
    pub data_index: usize,
    /// Metric exponent.
    pub alpha: f64,
}

impl Default for FiniteChainSpec {
    fn default() -> Self {
        Self {
            theta_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            output_grid: (0..6).map(f64::from).collect(),
            likelihood_table: vec![
                vec![0.30, 0.25, 0.18, 0.12, 0.09, 0.06],
                vec![0.20, 0.24, 0.22, 0.16, 0.10, 0.08],
                vec![0.10, 0.15, 0.25, 0.25, 0.15, 0.10],
                vec![0.08, 0.10, 0.16, 0.22, 0.24, 0.20],
                vec![0.05, 0.08, 0.12, 0.20, 0.25, 0.30],
            ],
            prior_weights: vec![0.10, 0.15, 0.30, 0.25, 0.20],
            data_index: 2,
            alpha: 1.0,
        }
    }
}

impl FiniteChainSpec {
    pub fn k(&self) -> usize {
        self.theta_grid.len()
    }

    pub fn j(&self) -> usize {
        self.output_grid.len()
    }

    pub fn n_states(&self) -> usize {
        self.k() * self.j()
    }

    /// State index of (θ index, output index).
    pub fn state(&self, k: usize, j: usize) -> usize {
        k * self.j() + j
    }

    pub fn validate(&self) -> Result<()> {
        let (k, j) = (self.k(), self.j());
        let bad = |msg: String| Err(SabcError::InvalidModel(format!("finite_chain: {msg}")));
        if k == 0 || j == 0 {
            return bad("grids must be nonempty".into());
        }
        if self.likelihood_table.len() != k || self.prior_weights.len() != k {
            return bad("likelihood table and prior weights need one row per theta".into());
        }
        for (i, row) in self.likelihood_table.iter().enumerate() {
            if row.len() != j || row.iter().any(|p| !(*p >= 0.0)) {
                return bad(format!("likelihood row {i} must have {j} nonnegative entries"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return bad(format!("likelihood row {i} sums to {sum}"));
            }
        }
        if self.prior_weights.iter().any(|p| !(*p > 0.0)) {
            return bad("prior weights must be positive".into());
        }
        let total: f64 = self.prior_weights.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return bad(format!("prior weights sum to {total}"));
        }
        if self.data_index >= j {
            return bad(format!("data_index {} out of range", self.data_index));
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0".into());
        }
        let mut sorted = self.theta_grid.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("theta grid values must be distinct".into());
        }
        Ok(())
    }

    /// Data-distance energy of output index `j`.
    pub fn u1(&self, j: usize) -> f64 {
        let y = self.output_grid[self.data_index];
        (self.output_grid[j] - y).abs().powf(self.alpha) / self.alpha
    }

    /// Prior energy of θ index `k`.
    pub fn u2(&self, k: usize) -> f64 {
        -self.prior_weights[k].ln()
    }

    /// Inverse temperatures for `te1` and optional `te2` (single-temperature
    /// chains weight the prior at unit temperature).
    fn inverse(te1: f64, te2: Option<f64>) -> [f64; 2] {
        [1.0 / te1, te2.map_or(1.0, |t| 1.0 / t)]
    }

    /// Closed-form equilibrium `∝ L(x|θ) exp(-u1/Te1 - u2/Te2)` over states.
    pub fn gibbs_distribution(&self, te1: f64, te2: Option<f64>) -> DVector<f64> {
        let b = Self::inverse(te1, te2);
        let mut pi = DVector::from_fn(self.n_states(), |s, _| {
            let (k, j) = (s / self.j(), s % self.j());
            self.likelihood_table[k][j] * (-b[0] * self.u1(j) - b[1] * self.u2(k)).exp()
        });
        let z = pi.sum();
        pi /= z;
        pi
    }

    /// Exact Onsager matrix `Σ_s π(s) Σ_s' P_prop(s→s') w Δu Δuᵀ` at
    /// inverse temperatures `inv_t`, with a uniform grid proposal.
    pub fn exact_onsager(&self, inv_t: [f64; 2]) -> Matrix2<f64> {
        let (kk, jj) = (self.k(), self.j());
        let pi = self.gibbs_distribution(1.0 / inv_t[0], Some(1.0 / inv_t[1]));
        let mut l = Matrix2::zeros();
        for k in 0..kk {
            for j in 0..jj {
                let p0 = pi[self.state(k, j)];
                for k2 in 0..kk {
                    for j2 in 0..jj {
                        let du = nalgebra::Vector2::new(
                            self.u1(j2) - self.u1(j),
                            self.u2(k2) - self.u2(k),
                        );
                        let w = (-inv_t[0] * du[0] - inv_t[1] * du[1]).min(0.0).exp();
                        let q = self.likelihood_table[k2][j2] / kk as f64;
                        l += du * du.transpose() * (p0 * q * w);
                    }
                }
            }
        }
        l
    }
}

/// Explicit Markov matrix over (θ, x) states with a uniform θ proposal.
///
/// `te2 = None` gives the single-temperature kernel, with the prior entering
/// the target at unit temperature.
pub fn build_transition_matrix(
    spec: &FiniteChainSpec,
    te1: f64,
    te2: Option<f64>,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if !(te1 > 0.0) || te2.is_some_and(|t| !(t > 0.0)) {
        return Err(SabcError::InvalidArgument(
            "environmental temperatures must be > 0".into(),
        ));
    }
    let (kk, jj) = (spec.k(), spec.j());
    let b = FiniteChainSpec::inverse(te1, te2);
    let n = spec.n_states();
    let mut p = DMatrix::zeros(n, n);
    for k in 0..kk {
        for j in 0..jj {
            let s = spec.state(k, j);
            for k2 in 0..kk {
                for j2 in 0..jj {
                    let s2 = spec.state(k2, j2);
                    if s2 == s {
                        continue;
                    }
                    let du1 = spec.u1(j2) - spec.u1(j);
                    let du2 = spec.u2(k2) - spec.u2(k);
                    let acc = (-b[0] * du1 - b[1] * du2).min(0.0).exp();
                    p[(s, s2)] = spec.likelihood_table[k2][j2] / kk as f64 * acc;
                }
            }
            let off: f64 = p.row(s).sum();
            assert!(off <= 1.0 + 1e-12, "row {s} leaves no mass for staying");
            p[(s, s)] = 1.0 - off;
        }
    }
    Ok(p)
}

/// Left fixed point of a row-stochastic matrix by power iteration.
pub fn stationary_distribution(p: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let n = p.nrows();
    let pt = p.transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..max_iter {
        let mut next = &pt * &pi;
        next /= next.sum();
        let change = (&next - &pi).amax();
        pi = next;
        if change < tol {
            return Ok(pi);
        }
    }
    Err(SabcError::InvalidArgument(format!(
        "power iteration did not reach {tol} in {max_iter} steps"
    )))
}

/// The finite chain as a simulator.
#[derive(Clone, Debug)]
pub struct FiniteChain {
    spec: FiniteChainSpec,
    data: OutputPoint,
}

impl FiniteChain {
    pub fn new(spec: FiniteChainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            data: OutputPoint::Continuous(vec![spec.output_grid[spec.data_index]]),
            spec,
        })
    }

    pub fn spec(&self) -> &FiniteChainSpec {
        &self.spec
    }

    fn theta_index(&self, theta: &ParameterPoint) -> Option<usize> {
        let t = theta.coords()[0];
        self.spec.theta_grid.iter().position(|g| *g == t)
    }
}

impl Model for FiniteChain {
    fn name(&self) -> &str {
        "finite_chain"
    }

    fn dim(&self) -> usize {
        1
    }

    fn data(&self) -> &OutputPoint {
        &self.data
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
        let k = self.theta_index(theta).ok_or_else(|| {
            SabcError::Simulator(format!("theta {:?} is not on the grid", theta.coords()))
        })?;
        let j = rng.categorical(&self.spec.likelihood_table[k]);
        Ok(OutputPoint::Continuous(vec![self.spec.output_grid[j]]))
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
        ParameterPoint::scalar(self.spec.theta_grid[rng.categorical(&self.spec.prior_weights)])
    }

    fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
        Some(
            self.theta_index(theta)
                .map_or(f64::NEG_INFINITY, |k| self.spec.prior_weights[k].ln()),
        )
    }

    fn in_support(&self, theta: &ParameterPoint) -> bool {
        self.theta_index(theta).is_some()
    }

    fn informative_prior(&self) -> bool {
        let w = &self.spec.prior_weights;
        w.iter().any(|p| *p != w[0])
    }

    fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    fn posterior_oracle(&self) -> Option<PosteriorOracle> {
        let s = &self.spec;
        let unnorm: Vec<f64> = (0..s.k())
            .map(|k| s.prior_weights[k] * s.likelihood_table[k][s.data_index])
            .collect();
        let z: f64 = unnorm.iter().sum();
        Some(PosteriorOracle::Discrete {
            values: s.theta_grid.clone(),
            probs: unnorm.iter().map(|p| p / z).collect(),
        })
    }

    fn grid(&self) -> Option<&[f64]> {
        Some(&self.spec.theta_grid)
    }
}
