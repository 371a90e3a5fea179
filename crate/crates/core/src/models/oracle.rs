use statrs::distribution::{Beta, Continuous, ContinuousCDF, Normal};

/// Exact posterior of a bundled model, used to score samplers.
#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorOracle {
    /// Normal restricted to `[lo, hi]`.
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    /// Bivariate normal; the prior box is assumed wide enough to ignore.
    BivariateNormal { mean: [f64; 2], cov: [[f64; 2]; 2] },
    /// Posterior over a finite grid.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl PosteriorOracle {
    pub fn dim(&self) -> usize {
        match self {
            PosteriorOracle::BivariateNormal { .. } => 2,
            _ => 1,
        }
    }

    fn std_normal() -> Normal {
        Normal::new(0.0, 1.0).expect("unit normal")
    }

    /// Marginal CDF of coordinate `component`.
    pub fn cdf(&self, component: usize, x: f64) -> f64 {
        match self {
            PosteriorOracle::TruncatedNormal { mean, sd, lo, hi } => {
                if x <= *lo {
                    return 0.0;
                }
                if x >= *hi {
                    return 1.0;
                }
                let n = Self::std_normal();
                let (a, b) = (n.cdf((lo - mean) / sd), n.cdf((hi - mean) / sd));
                (n.cdf((x - mean) / sd) - a) / (b - a)
            }
            PosteriorOracle::Beta { a, b } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    Beta::new(*a, *b).expect("valid beta").cdf(x)
                }
            }
            PosteriorOracle::BivariateNormal { mean, cov } => {
                let sd = cov[component][component].sqrt();
                Self::std_normal().cdf((x - mean[component]) / sd)
            }
            PosteriorOracle::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v <= x)
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Marginal density of coordinate `component` (continuous oracles only).
    pub fn density(&self, component: usize, x: f64) -> Option<f64> {
        match self {
            PosteriorOracle::TruncatedNormal { mean, sd, lo, hi } => {
                if x < *lo || x > *hi {
                    return Some(0.0);
                }
                let n = Self::std_normal();
                let z = n.cdf((hi - mean) / sd) - n.cdf((lo - mean) / sd);
                Some(n.pdf((x - mean) / sd) / sd / z)
            }
            PosteriorOracle::Beta { a, b } => Some(if x <= 0.0 || x >= 1.0 {
                0.0
            } else {
                Beta::new(*a, *b).expect("valid beta").pdf(x)
            }),
            PosteriorOracle::BivariateNormal { mean, cov } => {
                let sd = cov[component][component].sqrt();
                Some(Self::std_normal().pdf((x - mean[component]) / sd) / sd)
            }
            PosteriorOracle::Discrete { .. } => None,
        }
    }

    /// Interval carrying essentially all the mass of `component`.
    pub fn support(&self, component: usize) -> (f64, f64) {
        match self {
            PosteriorOracle::TruncatedNormal { mean, sd, lo, hi } => {
                (lo.max(mean - 12.0 * sd), hi.min(mean + 12.0 * sd))
            }
            PosteriorOracle::Beta { .. } => (0.0, 1.0),
            PosteriorOracle::BivariateNormal { mean, cov } => {
                let sd = cov[component][component].sqrt();
                (mean[component] - 12.0 * sd, mean[component] + 12.0 * sd)
            }
            PosteriorOracle::Discrete { values, .. } => (
                values.iter().cloned().fold(f64::INFINITY, f64::min),
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    pub fn mean(&self, component: usize) -> f64 {
        match self {
            PosteriorOracle::TruncatedNormal { mean, sd, lo, hi } => {
                let n = Self::std_normal();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                mean + sd * (n.pdf(a) - n.pdf(b)) / (n.cdf(b) - n.cdf(a))
            }
            PosteriorOracle::Beta { a, b } => a / (a + b),
            PosteriorOracle::BivariateNormal { mean, .. } => mean[component],
            PosteriorOracle::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    pub fn sd(&self, component: usize) -> f64 {
        match self {
            PosteriorOracle::TruncatedNormal { mean, sd, lo, hi } => {
                let n = Self::std_normal();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let z = n.cdf(b) - n.cdf(a);
                let la = if a.is_finite() { a * n.pdf(a) } else { 0.0 };
                let lb = if b.is_finite() { b * n.pdf(b) } else { 0.0 };
                let r = (n.pdf(a) - n.pdf(b)) / z;
                sd * (1.0 + (la - lb) / z - r * r).sqrt()
            }
            PosteriorOracle::Beta { a, b } => {
                let s = a + b;
                (a * b / (s * s * (s + 1.0))).sqrt()
            }
            PosteriorOracle::BivariateNormal { cov, .. } => cov[component][component].sqrt(),
            PosteriorOracle::Discrete { .. } => {
                let m = self.mean(component);
                let PosteriorOracle::Discrete { values, probs } = self else {
                    unreachable!()
                };
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - m) * (v - m))
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }

    pub fn correlation(&self) -> Option<f64> {
        match self {
            PosteriorOracle::BivariateNormal { cov, .. } => {
                Some(cov[0][1] / (cov[0][0] * cov[1][1]).sqrt())
            }
            _ => None,
        }
    }

    /// `|∫ density - 1|` per component by composite Simpson quadrature;
    /// `None` for discrete oracles.
    pub fn normalization_error(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for c in 0..self.dim() {
            let (lo, hi) = self.support(c);
            let n = 40_000;
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * self.density(c, lo + i as f64 * h)?;
            }
            worst = worst.max((acc * h / 3.0 - 1.0).abs());
        }
        Some(worst)
    }
}
