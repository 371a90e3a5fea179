//! Distances on output space and the uniform-prior energy transform.
//!
//! The transform replaces a raw distance ρ by the prior-predictive probability
//! of landing at least as close to the data, estimated from the M distances
//! drawn during initialization. Under the prior predictive the transformed
//! energy is uniform on [0, 1], which fixes the specific heat at one.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};
use crate::types::OutputPoint;

/// Below this many samples a transform is flagged as degenerate.
pub const DEFAULT_MIN_SAMPLES: usize = 100;

/// `(1/alpha) * sum |x_i - y_i|^alpha`.
pub fn rho_power(x: &OutputPoint, y: &OutputPoint, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(SabcError::InvalidArgument(format!(
            "metric exponent must be > 0, got {alpha}"
        )));
    }
    let sum = match (x, y) {
        (OutputPoint::Count(a), OutputPoint::Count(b)) => (*a as f64 - *b as f64).abs().powf(alpha),
        (OutputPoint::Continuous(a), OutputPoint::Continuous(b)) => {
            if a.len() != b.len() {
                return Err(SabcError::DimensionMismatch {
                    expected: b.len(),
                    got: a.len(),
                });
            }
            a.iter()
                .zip(b)
                .map(|(ai, bi)| (ai - bi).abs().powf(alpha))
                .sum()
        }
        _ => return Err(SabcError::OutputKindMismatch),
    };
    Ok(sum / alpha)
}

/// Empirical prior-predictive CDF of the distance to the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTransform {
    sorted: Vec<f64>,
    /// Built from fewer samples than the configured floor.
    pub degenerate: bool,
}

impl EnergyTransform {
    pub fn build(distances: Vec<f64>) -> Result<Self> {
        Self::build_with_floor(distances, DEFAULT_MIN_SAMPLES)
    }

    pub fn build_with_floor(mut distances: Vec<f64>, min_samples: usize) -> Result<Self> {
        if distances.is_empty() {
            return Err(SabcError::EmptyInput("energy transform needs distances"));
        }
        if let Some((index, &value)) = distances
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(SabcError::InvalidDistance { index, value });
        }
        distances.sort_by(f64::total_cmp);
        let degenerate = distances.len() < min_samples;
        if degenerate {
            log::warn!(
                "energy transform built from only {} distances (floor {min_samples})",
                distances.len()
            );
        }
        Ok(Self {
            sorted: distances,
            degenerate,
        })
    }

    pub fn sorted_distances(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of samples M.
    pub fn built_from(&self) -> usize {
        self.sorted.len()
    }

    /// Transformed energy in `[0, M/(M+1)]`.
    ///
    /// Ranks are interpolated linearly between consecutive distinct distances,
    /// with 0 anchored at distance 0; a run of tied distances sits at its mean rank.
    pub fn apply(&self, rho: f64) -> f64 {
        let d = &self.sorted;
        let m = d.len();
        let scale = (m + 1) as f64;
        if rho.is_nan() {
            return m as f64 / scale;
        }
        let rho = rho.max(0.0);
        let lo = d.partition_point(|x| *x < rho);
        let hi = d.partition_point(|x| *x <= rho);
        if hi > lo {
            return ((lo + 1 + hi) as f64 / 2.0) / scale;
        }
        let k = lo;
        if k == m {
            return m as f64 / scale;
        }
        let (low_value, low_rank) = if k == 0 {
            (0.0, 0.0)
        } else {
            let start = d.partition_point(|x| *x < d[k - 1]);
            (d[k - 1], (start + 1 + k) as f64 / 2.0)
        };
        let end = d.partition_point(|x| *x <= d[k]);
        let high_rank = (k + 1 + end) as f64 / 2.0;
        let frac = (rho - low_value) / (d[k] - low_value);
        (low_rank + frac * (high_rank - low_rank)) / scale
    }
}
