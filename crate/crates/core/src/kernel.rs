//! Jump proposals in parameter space.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::config::ProposalKind;
use crate::error::{Result, SabcError};
use crate::model::Model;
use crate::rng::RngStream;
use crate::types::ParameterPoint;

/// Unbiased sample covariance (divisor N-1) of a set of points.
pub fn sample_covariance(points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(SabcError::TooFewParticles(n));
    }
    let d = points[0].len();
    let mut mean = DVector::zeros(d);
    for p in points {
        if p.len() != d {
            return Err(SabcError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        mean += DVector::from_column_slice(p);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let dev = DVector::from_column_slice(p) - &mean;
        cov += &dev * dev.transpose();
    }
    Ok(cov / (n - 1) as f64)
}

/// Covariance of particle parameters, in the kernel's unconstrained coordinates.
pub fn ensemble_covariance<'a>(
    thetas: impl IntoIterator<Item = &'a ParameterPoint>,
    model: &dyn Model,
) -> Result<DMatrix<f64>> {
    let reparam = model.reparam();
    let pts: Vec<Vec<f64>> = thetas
        .into_iter()
        .map(|t| reparam.to_unconstrained(t.coords()))
        .collect();
    sample_covariance(&pts)
}

/// Symmetric Gaussian jump kernel.
#[derive(Clone, Debug)]
pub struct JumpKernel {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl JumpKernel {
    /// Kernel with covariance `beta * sigma + s * tr(sigma) * I`.
    pub fn build(sigma: &DMatrix<f64>, beta: f64, s: f64) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d {
            return Err(SabcError::DimensionMismatch {
                expected: d,
                got: sigma.ncols(),
            });
        }
        let cov = sigma * beta + DMatrix::identity(d, d) * (s * sigma.trace());
        Self::from_covariance(cov)
    }

    pub fn from_covariance(cov: DMatrix<f64>) -> Result<Self> {
        if cov.iter().any(|c| !c.is_finite()) {
            return Err(SabcError::DegenerateKernel);
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or(SabcError::DegenerateKernel)?
            .l();
        if chol.diagonal().iter().any(|v| !(*v > 0.0)) {
            return Err(SabcError::DegenerateKernel);
        }
        Ok(Self { cov, chol })
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// `phi + L z`, z standard normal.
    pub fn jump(&self, phi: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.normal());
        let step = &self.chol * z;
        phi.iter().zip(step.iter()).map(|(p, s)| p + s).collect()
    }

    /// Log density of a jump from `from` to `to`.
    pub fn log_density(&self, from: &[f64], to: &[f64]) -> f64 {
        let d = self.dim();
        let diff = DVector::from_iterator(d, to.iter().zip(from).map(|(t, f)| t - f));
        let w = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        let log_det: f64 = self.chol.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * w.norm_squared() - log_det - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// A candidate move together with the log Metropolis-Hastings correction
/// `ln[q(θ'→θ) / q(θ→θ')]` that makes the kernel's measure Lebesgue in θ.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub theta: ParameterPoint,
    pub log_correction: f64,
}

/// The parameter-space move used by a sweep.
#[derive(Clone, Debug)]
pub enum Proposal {
    Gaussian(JumpKernel),
    /// Independent draw from the prior.
    Prior,
    /// Uniform over a finite grid (k ≡ 1/K).
    Grid(Vec<f64>),
}

impl Proposal {
    /// Proposal for `kind`, with the Gaussian covariance taken from `thetas`.
    pub fn for_ensemble<'a>(
        kind: ProposalKind,
        model: &dyn Model,
        thetas: impl IntoIterator<Item = &'a ParameterPoint>,
        beta: f64,
        s: f64,
    ) -> Result<Self> {
        if let Some(grid) = model.grid() {
            return Ok(Proposal::Grid(grid.to_vec()));
        }
        match kind {
            ProposalKind::Prior => Ok(Proposal::Prior),
            ProposalKind::Gaussian => {
                let sigma = ensemble_covariance(thetas, model)?;
                Ok(Proposal::Gaussian(JumpKernel::build(&sigma, beta, s)?))
            }
        }
    }

    /// Propose a move from `theta`. `None` when the candidate leaves the support.
    pub fn propose(
        &self,
        model: &dyn Model,
        theta: &ParameterPoint,
        rng: &mut RngStream,
    ) -> Option<Candidate> {
        let candidate = match self {
            Proposal::Gaussian(kernel) => {
                let reparam = model.reparam();
                let phi = reparam.to_unconstrained(theta.coords());
                let next = reparam.from_unconstrained(&kernel.jump(&phi, rng))?;
                if next.iter().any(|c| !c.is_finite()) {
                    return None;
                }
                let log_correction =
                    reparam.log_jacobian(&next) - reparam.log_jacobian(theta.coords());
                Candidate {
                    theta: ParameterPoint::new(next),
                    log_correction,
                }
            }
            Proposal::Prior => {
                let next = model.prior_sample(rng);
                let log_correction = match (
                    model.prior_log_density(theta),
                    model.prior_log_density(&next),
                ) {
                    (Some(old), Some(new)) if model.informative_prior() => old - new,
                    _ => 0.0,
                };
                Candidate {
                    theta: next,
                    log_correction,
                }
            }
            Proposal::Grid(grid) => Candidate {
                theta: ParameterPoint::scalar(grid[rng.index(grid.len())]),
                log_correction: 0.0,
            },
        };
        model.in_support(&candidate.theta).then_some(candidate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn covariance_of_identical_points_is_zero() {
        let pts = vec![vec![1.0, 2.0]; 5];
        assert_eq!(sample_covariance(&pts).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn covariance_uses_unbiased_divisor() {
        let c = sample_covariance(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(c[(0, 0)], 2.0);
        assert!(matches!(
            sample_covariance(&[vec![0.0]]),
            Err(SabcError::TooFewParticles(1))
        ));
    }

    #[test]
    fn covariance_of_standard_normals() {
        let mut rng = RngStream::from_seed(17);
        let pts: Vec<Vec<f64>> = (0..100_000)
            .map(|_| vec![rng.normal(), rng.normal()])
            .collect();
        let c = sample_covariance(&pts).unwrap();
        for i in 0..2 {
            assert!((c[(i, i)] - 1.0).abs() < 0.02, "{c}");
        }
        assert!(c[(0, 1)].abs() < 0.02, "{c}");
    }

    #[test]
    fn build_examples() {
        let k = JumpKernel::build(&DMatrix::identity(2, 2), 1.0, 0.1).unwrap();
        assert_relative_eq!(k.cov()[(0, 0)], 1.2, epsilon = 1e-15);
        assert_relative_eq!(k.cov()[(1, 1)], 1.2, epsilon = 1e-15);
        assert_eq!(k.cov()[(0, 1)], 0.0);

        let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let k = JumpKernel::build(&sigma, 0.5, 0.0).unwrap();
        assert_eq!(k.cov(), &DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])));

        assert!(matches!(
            JumpKernel::build(&DMatrix::zeros(2, 2), 1.0, 0.0),
            Err(SabcError::DegenerateKernel)
        ));
    }

    #[test]
    fn tiny_kernel_barely_moves() {
        let k = JumpKernel::from_covariance(DMatrix::identity(2, 2) * 1e-24).unwrap();
        let mut rng = RngStream::from_seed(1);
        let next = k.jump(&[0.3, -0.7], &mut rng);
        assert!((next[0] - 0.3).abs() < 1e-9 && (next[1] + 0.7).abs() < 1e-9);
    }

    #[test]
    fn jump_moments() {
        let k = JumpKernel::from_covariance(DMatrix::identity(2, 2)).unwrap();
        let mut rng = RngStream::from_seed(99);
        let pts: Vec<Vec<f64>> = (0..100_000).map(|_| k.jump(&[0.0, 0.0], &mut rng)).collect();
        for i in 0..2 {
            let mean = pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
        }
        let c = sample_covariance(&pts).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 0.03 && (c[(1, 1)] - 1.0).abs() < 0.03);
        assert!(c[(0, 1)].abs() < 0.03);
    }

    #[test]
    fn jump_is_deterministic_per_seed() {
        let k = JumpKernel::from_covariance(DMatrix::identity(1, 1)).unwrap();
        let a = k.jump(&[1.0], &mut RngStream::from_seed(5));
        let b = k.jump(&[1.0], &mut RngStream::from_seed(5));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(
            a in prop::collection::vec(-3.0f64..3.0, 2),
            b in prop::collection::vec(-3.0f64..3.0, 2),
            c01 in -0.9f64..0.9,
        ) {
            let cov = DMatrix::from_row_slice(2, 2, &[1.0, c01, c01, 1.5]);
            let k = JumpKernel::from_covariance(cov).unwrap();
            let ratio = (k.log_density(&a, &b) - k.log_density(&b, &a)).exp();
            prop_assert!((ratio - 1.0).abs() < 1e-12);
        }

        #[test]
        fn built_trace(d0 in 0.1f64..5.0, d1 in 0.1f64..5.0, beta in 0.1f64..3.0, s in 0.0f64..1.0) {
            let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![d0, d1]));
            let k = JumpKernel::build(&sigma, beta, s).unwrap();
            let tr = d0 + d1;
            prop_assert!((k.cov().trace() - (beta * tr + s * 2.0 * tr)).abs() < 1e-12);
        }
    }
}
