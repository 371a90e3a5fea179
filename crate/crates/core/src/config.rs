use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};

/// How candidate parameters are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    /// Symmetric Gaussian jump with covariance `beta * Sigma + s * tr(Sigma) * I`.
    #[default]
    Gaussian,
    /// Independent draws from the prior (infinitely fast mixing).
    Prior,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    /// Fit linear summaries when the output dimension exceeds the parameter dimension.
    Auto,
    #[default]
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_particles: usize,
    /// Total simulator calls, initialization and Onsager probes included.
    pub sim_budget: usize,
    /// Annealing speed: `v/gamma` in the flat case, the target entropy production rate otherwise.
    pub v: f64,
    pub beta: f64,
    pub s: f64,
    /// Counter-force gain on the prior temperature.
    pub a: f64,
    /// Size M of the initial prior-predictive sample.
    pub init_oversample: usize,
    pub seed: u64,
    pub adapt_covariance: bool,
    /// Sweeps between re-anchoring the temperature estimates (general case).
    pub recalibration_period: usize,
    pub proposal: ProposalKind,
    /// Overrides the model's metric exponent.
    pub alpha: Option<f64>,
    /// Stop once the environmental temperature falls to this value.
    pub te_floor: f64,
    /// Onsager probes per re-estimation; defaults to N/10.
    pub n_probe: Option<usize>,
    /// Sweeps between Onsager re-estimations.
    pub onsager_period: usize,
    pub summaries: SummaryMode,
    /// Hold the flat-case environmental temperature fixed instead of scheduling it.
    pub fixed_te: Option<f64>,
}

impl RunConfig {
    pub fn new(n_particles: usize, seed: u64) -> Self {
        Self {
            n_particles,
            sim_budget: 1_000_000,
            v: 0.5,
            beta: 1.0,
            s: 0.01,
            a: 1.0,
            init_oversample: 10 * n_particles,
            seed,
            adapt_covariance: false,
            recalibration_period: 25,
            proposal: ProposalKind::Gaussian,
            alpha: None,
            te_floor: 1e-4,
            n_probe: None,
            onsager_period: 10,
            summaries: SummaryMode::Off,
            fixed_te: None,
        }
    }

    pub fn n_probe(&self) -> usize {
        self.n_probe.unwrap_or((self.n_particles / 10).max(1))
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_particles < 2 {
            v.push(format!("n_particles must be >= 2 (got {})", self.n_particles));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            v.push(format!("v must be > 0 (got {})", self.v));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            v.push(format!("beta must be > 0 (got {})", self.beta));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            v.push(format!("s must be >= 0 (got {})", self.s));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            v.push(format!("a must be > 0 (got {})", self.a));
        }
        if self.init_oversample < self.n_particles {
            v.push(format!(
                "init_oversample must be >= n_particles (got {} < {})",
                self.init_oversample, self.n_particles
            ));
        }
        if self.init_oversample > self.sim_budget {
            v.push(format!(
                "sim_budget must cover initialization (got {} < init_oversample {})",
                self.sim_budget, self.init_oversample
            ));
        }
        if self.recalibration_period == 0 {
            v.push("recalibration_period must be >= 1".into());
        }
        if self.onsager_period == 0 {
            v.push("onsager_period must be >= 1".into());
        }
        if matches!(self.alpha, Some(a) if !(a > 0.0 && a.is_finite())) {
            v.push(format!("alpha must be > 0 (got {:?})", self.alpha));
        }
        if !(self.te_floor >= 0.0) {
            v.push(format!("te_floor must be >= 0 (got {})", self.te_floor));
        }
        if self.n_probe == Some(0) {
            v.push("n_probe must be >= 1".into());
        }
        if matches!(self.fixed_te, Some(t) if !(t > 0.0 && t.is_finite())) {
            v.push(format!("fixed_te must be > 0 (got {:?})", self.fixed_te));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SabcError::InvalidConfig(v))
        }
    }
}
