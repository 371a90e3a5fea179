//! Thermodynamic observables of the ensemble and the estimators that drive
//! the adaptive schedules.
//!
//! Temperatures are tracked as inverse temperatures internally so that the
//! prior state (`1/T1 = 0`) is representable.

use bitflags::bitflags;
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Result, SabcError};
use crate::kernel::Proposal;
use crate::model::Model;
use crate::rng::RngStream;
use crate::types::{prior_energy, Ensemble, EnergyFn, Particle};

/// Condition number above which a 2x2 solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

bitflags! {
    #[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
    pub struct TraceFlags: u16 {
        const ONSAGER_UPDATED = 1;
        const RECALIBRATED = 1 << 1;
        const RECALIBRATION_FAILED = 1 << 2;
        const RATE_UNREACHABLE = 1 << 3;
        const RUNAWAY_T2 = 1 << 4;
        const ILL_CONDITIONED = 1 << 5;
        const T2_OUT_OF_BAND = 1 << 6;
        const DEGENERATE_ONSAGER = 1 << 7;
        const DEGENERATE_KERNEL = 1 << 8;
        const DEGENERATE_TRANSFORM = 1 << 9;
        const BUDGET_EXHAUSTED = 1 << 10;
    }
}

impl TraceFlags {
    /// `|`-separated lower-case names, empty when no flag is set.
    pub fn label(&self) -> String {
        self.iter_names()
            .map(|(name, _)| name.to_ascii_lowercase())
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Thermodynamic state recorded once per sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermoState {
    pub sweep: usize,
    pub sims_used: usize,
    pub u1_total: f64,
    pub u2_total: f64,
    pub t1: f64,
    pub t2: f64,
    pub te1: f64,
    pub te2: f64,
    pub acc_rate: f64,
    pub sigma_dot: f64,
    pub sigma_cum: f64,
    pub flags: TraceFlags,
}

/// Which extensity to total.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyKind {
    U1,
    U2,
}

pub fn total_energy(ensemble: &Ensemble, which: EnergyKind) -> f64 {
    ensemble
        .particles
        .iter()
        .map(|p| match which {
            EnergyKind::U1 => p.u1,
            EnergyKind::U2 => p.u2,
        })
        .sum()
}

/// `T = U / N`, valid for energies with unit specific heat.
pub fn temperature_from_energy(u_total: f64, n: usize) -> f64 {
    u_total / n as f64
}

/// `sum_j dU_j (1/T_j - 1/Te_j)`.
pub fn entropy_production_rate(du: &[f64], t: &[f64], te: &[f64]) -> Result<f64> {
    if du.len() != t.len() || du.len() != te.len() {
        return Err(SabcError::DimensionMismatch {
            expected: du.len(),
            got: t.len().min(te.len()),
        });
    }
    if let Some(bad) = t.iter().chain(te).find(|x| !(**x > 0.0)) {
        return Err(SabcError::InvalidArgument(format!(
            "temperatures must be positive, got {bad}"
        )));
    }
    Ok(du
        .iter()
        .zip(t.iter().zip(te))
        .map(|(d, (t, te))| d * (1.0 / t - 1.0 / te))
        .sum())
}

/// Same as [`entropy_production_rate`] with forces given directly.
pub fn entropy_production_from_forces(du: Vector2<f64>, force: Vector2<f64>) -> f64 {
    force.dot(&du)
}

/// Population mean and covariance of (u1, u2) over the ensemble.
pub fn energy_moments(particles: &[Particle]) -> (Vector2<f64>, Matrix2<f64>) {
    let n = particles.len() as f64;
    let mean = particles
        .iter()
        .fold(Vector2::zeros(), |acc, p| acc + Vector2::new(p.u1, p.u2))
        / n;
    let cov = particles.iter().fold(Matrix2::zeros(), |acc, p| {
        let d = Vector2::new(p.u1, p.u2) - mean;
        acc + d * d.transpose()
    }) / n;
    (mean, cov)
}

/// Estimated `dU/dT`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub matrix: Matrix2<f64>,
    /// Some energy has zero variance across the ensemble.
    pub degenerate: bool,
}

/// Fluctuation-dissipation estimate of `dU/dT`:
/// `N [[Var u1 / T1², Cov / T2²], [Cov / T1², Var u2 / T2²]]`.
pub fn jacobian_u_t(ensemble: &Ensemble, t1: f64, t2: f64) -> Result<Jacobian> {
    let n = ensemble.len();
    if n < 2 {
        return Err(SabcError::TooFewParticles(n));
    }
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(SabcError::InvalidArgument(format!(
            "temperatures must be positive, got ({t1}, {t2})"
        )));
    }
    let (_, c) = energy_moments(&ensemble.particles);
    let nf = n as f64;
    let matrix = Matrix2::new(
        nf * c[(0, 0)] / (t1 * t1),
        nf * c[(0, 1)] / (t2 * t2),
        nf * c[(1, 0)] / (t1 * t1),
        nf * c[(1, 1)] / (t2 * t2),
    );
    Ok(Jacobian {
        matrix,
        degenerate: c[(0, 0)] == 0.0 || c[(1, 1)] == 0.0,
    })
}

fn condition_number(m: &Matrix2<f64>) -> f64 {
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn checked_solve(m: &Matrix2<f64>, rhs: Vector2<f64>) -> Result<Vector2<f64>> {
    let cond = condition_number(m);
    if !(cond < MAX_CONDITION) {
        return Err(SabcError::IllConditioned(cond));
    }
    m.lu().solve(&rhs).ok_or(SabcError::IllConditioned(cond))
}

/// `ΔT = (dU/dT)^{-1} ΔU`.
pub fn delta_temperatures(jac: &Matrix2<f64>, du: Vector2<f64>) -> Result<Vector2<f64>> {
    checked_solve(jac, du)
}

/// The same linear response in inverse temperatures: `Δ(1/T) = -(N Cov)^{-1} ΔU`.
///
/// Equivalent to [`delta_temperatures`] by the chain rule, but stays finite at
/// `1/T1 = 0` where `dU/dT` vanishes.
pub fn delta_inverse_temperatures(
    particles: &[Particle],
    du: Vector2<f64>,
) -> Result<Vector2<f64>> {
    let (_, c) = energy_moments(particles);
    let step = checked_solve(&(c * particles.len() as f64), du)?;
    Ok(-step)
}

/// Symmetric 2x2 linear-response matrix relating energy fluxes to forces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnsagerMatrix(pub Matrix2<f64>);

impl OnsagerMatrix {
    pub fn l11(&self) -> f64 {
        self.0[(0, 0)]
    }
    pub fn l12(&self) -> f64 {
        self.0[(0, 1)]
    }
    pub fn l22(&self) -> f64 {
        self.0[(1, 1)]
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[(0, 1)] == self.0[(1, 0)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigenvalues().min()
    }
}

#[derive(Clone, Debug)]
pub struct OnsagerEstimate {
    pub matrix: OnsagerMatrix,
    /// Standard error of each entry (from the per-probe spread).
    pub std_err: Matrix2<f64>,
    pub sims_used: usize,
}

/// Sum in a fixed binary tree so the result depends only on input order.
pub fn pairwise_sum<T>(items: &[T]) -> T
where
    T: Copy + std::ops::Add<Output = T> + Default,
{
    match items.len() {
        0 => T::default(),
        1 => items[0],
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Monte Carlo estimate of the Onsager matrix at inverse temperatures `inv_t`.
///
/// Each probe picks a particle uniformly, proposes a move, simulates an output
/// and contributes `w Δu Δuᵀ` with `w` the Metropolis acceptance probability
/// of that move. Probes are measurements only: the ensemble is untouched.
pub fn estimate_onsager(
    ensemble: &Ensemble,
    proposal: &Proposal,
    model: &dyn Model,
    energy: &EnergyFn,
    inv_t: [f64; 2],
    n_probe: usize,
    rng: &mut RngStream,
) -> Result<OnsagerEstimate> {
    if n_probe == 0 {
        return Err(SabcError::InvalidArgument("n_probe must be >= 1".into()));
    }
    if ensemble.is_empty() {
        return Err(SabcError::EmptyInput("onsager probes need particles"));
    }
    let family = rng.split();
    let probes: Vec<(Matrix2<f64>, bool)> = (0..n_probe)
        .into_par_iter()
        .map(|i| -> Result<(Matrix2<f64>, bool)> {
            let mut r = family.stream(i as u64);
            let z = &ensemble.particles[r.index(ensemble.len())];
            let Some(cand) = proposal.propose(model, &z.theta, &mut r) else {
                return Ok((Matrix2::zeros(), false));
            };
            let x = model.simulate(&cand.theta, &mut r)?;
            let du = Vector2::new(
                energy.energy(model, &x)? - z.u1,
                prior_energy(model, &cand.theta)? - z.u2,
            );
            let log_w = (-inv_t[0] * du[0] - inv_t[1] * du[1] + cand.log_correction).min(0.0);
            Ok((du * du.transpose() * log_w.exp(), true))
        })
        .collect::<Result<_>>()?;

    let sims_used = probes.iter().filter(|(_, simulated)| *simulated).count();
    let terms: Vec<Matrix2<f64>> = probes.into_iter().map(|(m, _)| m).collect();
    let n = n_probe as f64;
    let mut mean = pairwise_sum(&terms) / n;
    // the summands are symmetric; pin the off-diagonals bitwise
    mean[(1, 0)] = mean[(0, 1)];
    let sq: Vec<Matrix2<f64>> = terms
        .iter()
        .map(|t| (t - mean).component_mul(&(t - mean)))
        .collect();
    let var = pairwise_sum(&sq) / (n - 1.0).max(1.0);
    Ok(OnsagerEstimate {
        matrix: OnsagerMatrix(mean),
        std_err: var.map(|v| (v / n).sqrt()),
        sims_used,
    })
}

/// Which annealer's temperature definition to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Flat,
    General,
}

const RECAL_MAX_ITER: usize = 200;
const RECAL_REL_TOL: f64 = 1e-6;

/// Re-anchor the temperature estimate from the measured energies.
///
/// Returns inverse temperatures `[1/T1, 1/T2]`. In the flat case this is
/// `N/U1` and `1`. In the general case the prior-predictive store (a Gibbs
/// sample at `(1/T1, 1/T2) = (0, 1)`) is reweighted by
/// `exp(-u1/T1 - u2 (1/T2 - 1))` until its mean energies match the ensemble's.
pub fn recalibrate_temperatures(
    ensemble: &Ensemble,
    store: &[Particle],
    regime: Regime,
) -> Result<[f64; 2]> {
    let n = ensemble.len();
    if n == 0 {
        return Err(SabcError::EmptyInput("recalibration needs particles"));
    }
    match regime {
        Regime::Flat => Ok([n as f64 / total_energy(ensemble, EnergyKind::U1), 1.0]),
        Regime::General => {
            if store.is_empty() {
                return Err(SabcError::EmptyInput("recalibration needs the prior-predictive store"));
            }
            let (target, _) = energy_moments(&ensemble.particles);
            match_store_moments(store, target)
        }
    }
}

/// Reweighted mean and covariance of the store at shift `lambda = (1/T1, 1/T2 - 1)`.
fn reweighted_moments(store: &[Particle], lambda: Vector2<f64>) -> (f64, Vector2<f64>, Matrix2<f64>) {
    let expo: Vec<f64> = store
        .iter()
        .map(|p| -lambda[0] * p.u1 - lambda[1] * p.u2)
        .collect();
    let shift = expo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = expo.iter().map(|e| (e - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = store
        .iter()
        .zip(&w)
        .fold(Vector2::zeros(), |acc, (p, wi)| acc + Vector2::new(p.u1, p.u2) * *wi)
        / z;
    let cov = store.iter().zip(&w).fold(Matrix2::zeros(), |acc, (p, wi)| {
        let d = Vector2::new(p.u1, p.u2) - mean;
        acc + d * d.transpose() * *wi
    }) / z;
    (z.ln() + shift, mean, cov)
}

/// Damped Newton on the convex dual `ln Z(λ) + λ·m`, with `1/T1 >= 0`.
fn match_store_moments(store: &[Particle], target: Vector2<f64>) -> Result<[f64; 2]> {
    let objective = |lambda: Vector2<f64>| {
        let (log_z, _, _) = reweighted_moments(store, lambda);
        log_z + lambda.dot(&target)
    };
    let converged = |mean: &Vector2<f64>, lambda: &Vector2<f64>| {
        let r1 = (mean[0] - target[0]).abs() <= RECAL_REL_TOL * target[0].abs().max(1e-12)
            || (lambda[0] == 0.0 && mean[0] <= target[0]);
        let r2 = (mean[1] - target[1]).abs() <= RECAL_REL_TOL * target[1].abs().max(1e-12);
        r1 && r2
    };

    let mut lambda = Vector2::zeros();
    let mut residual = f64::INFINITY;
    for _ in 0..RECAL_MAX_ITER {
        let (_, mean, cov) = reweighted_moments(store, lambda);
        if converged(&mean, &lambda) {
            return Ok([lambda[0], lambda[1] + 1.0]);
        }
        let grad = target - mean;
        residual = grad.norm();
        let pinned = lambda[0] == 0.0 && grad[0] >= 0.0;
        let step = if pinned {
            let h = cov[(1, 1)];
            if !(h > 0.0) {
                break;
            }
            Vector2::new(0.0, -grad[1] / h)
        } else {
            match cov.lu().solve(&grad) {
                Some(s) if s.iter().all(|v| v.is_finite()) => -s,
                _ => break,
            }
        };
        let f0 = objective(lambda);
        let mut t = 1.0;
        let mut next = lambda;
        let mut improved = false;
        for _ in 0..60 {
            let mut cand = lambda + step * t;
            cand[0] = cand[0].max(0.0);
            if objective(cand) <= f0 + 1e-4 * t * grad.dot(&step).min(0.0) {
                next = cand;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved || next == lambda {
            break;
        }
        lambda = next;
    }
    let (_, mean, _) = reweighted_moments(store, lambda);
    if converged(&mean, &lambda) {
        return Ok([lambda[0], lambda[1] + 1.0]);
    }
    Err(SabcError::RecalibrationFailed {
        iterations: RECAL_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{OutputPoint, ParameterPoint};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn particle(u1: f64, u2: f64) -> Particle {
        Particle {
            theta: ParameterPoint::scalar(0.0),
            output: OutputPoint::Count(0),
            u1,
            u2,
        }
    }

    fn ensemble(energies: &[(f64, f64)]) -> Ensemble {
        Ensemble::new(energies.iter().map(|&(a, b)| particle(a, b)).collect())
    }

    #[test]
    fn totals() {
        let e = ensemble(&[(0.1, 1.0), (0.2, 1.0), (0.3, 1.0)]);
        assert_relative_eq!(total_energy(&e, EnergyKind::U1), 0.6, epsilon = 1e-15);
        assert_eq!(total_energy(&e, EnergyKind::U2), 3.0);
        assert_eq!(total_energy(&ensemble(&[(0.0, 0.0); 4]), EnergyKind::U1), 0.0);

        let mut doubled = e.clone();
        doubled.particles.extend(e.particles.clone());
        assert_eq!(
            total_energy(&doubled, EnergyKind::U1),
            2.0 * total_energy(&e, EnergyKind::U1)
        );
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(temperature_from_energy(0.0, 10), 0.0);
        assert_eq!(temperature_from_energy(500.0, 1000), 0.5);
    }

    #[test]
    fn truncated_gibbs_mean_energy_is_temperature() {
        // u ~ Exp(mean T) truncated to [0, 1]: mean = T - e^{-1/T}/(1 - e^{-1/T}) ≈ T
        let t = 0.2;
        let mut rng = RngStream::from_seed(41);
        let n = 100_000;
        let mut total = 0.0;
        let mut k = 0;
        while k < n {
            let u = -t * (1.0 - rng.uniform()).ln();
            if u <= 1.0 {
                total += u;
                k += 1;
            }
        }
        let est = temperature_from_energy(total, n);
        let q = (-1.0f64 / t).exp();
        let exact = t - q / (1.0 - q);
        // standard deviation of the truncated law is below t
        assert!((est - exact).abs() < 4.0 * t / (n as f64).sqrt(), "estimate {est}");
    }

    #[test]
    fn entropy_production_examples() {
        assert_eq!(entropy_production_rate(&[3.0], &[0.4], &[0.4]).unwrap(), 0.0);
        assert_eq!(entropy_production_rate(&[0.0, 0.0], &[0.4, 1.0], &[0.1, 2.0]).unwrap(), 0.0);
        let s = entropy_production_rate(&[-0.1], &[0.5], &[0.4]).unwrap();
        assert_relative_eq!(s, 0.05, epsilon = 1e-15);
        assert!(entropy_production_rate(&[1.0], &[0.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn entropy_production_is_bilinear(
            d1 in -2.0f64..2.0, d2 in -2.0f64..2.0,
            f1 in -2.0f64..2.0, f2 in -2.0f64..2.0,
            c in -3.0f64..3.0,
        ) {
            let du = Vector2::new(d1, d2);
            let f = Vector2::new(f1, f2);
            let base = entropy_production_from_forces(du, f);
            prop_assert!((entropy_production_from_forces(du * c, f) - c * base).abs() < 1e-12);
            prop_assert!((entropy_production_from_forces(du, f * c) - c * base).abs() < 1e-12);
            prop_assert_eq!(entropy_production_from_forces(Vector2::zeros(), f), 0.0);
            prop_assert_eq!(entropy_production_from_forces(du, Vector2::zeros()), 0.0);
        }
    }

    #[test]
    fn jacobian_degenerate_when_u1_constant() {
        let e = ensemble(&[(0.5, 1.0), (0.5, 2.0), (0.5, 4.0)]);
        let j = jacobian_u_t(&e, 0.3, 1.0).unwrap();
        assert!(j.degenerate);
        assert_eq!(j.matrix[(0, 0)], 0.0);
        assert_eq!(j.matrix[(1, 0)], 0.0);
    }

    #[test]
    fn jacobian_scales_with_n() {
        let e = ensemble(&[(0.1, 1.0), (0.7, 2.0), (0.4, 4.0), (0.2, 0.5)]);
        let mut doubled = e.clone();
        doubled.particles.extend(e.particles.clone());
        let j1 = jacobian_u_t(&e, 0.3, 1.1).unwrap().matrix;
        let j2 = jacobian_u_t(&doubled, 0.3, 1.1).unwrap().matrix;
        for k in 0..4 {
            assert_relative_eq!(j2[k], 2.0 * j1[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobian_exponential_ensemble() {
        let (t1, n) = (0.3, 100_000);
        let mut rng = RngStream::from_seed(8);
        let parts: Vec<(f64, f64)> = (0..n)
            .map(|_| (-t1 * (1.0 - rng.uniform()).ln(), rng.normal()))
            .collect();
        let e = ensemble(&parts);
        let j = jacobian_u_t(&e, t1, 1.0).unwrap().matrix;
        assert!((j[(0, 0)] / n as f64 - 1.0).abs() < 0.05, "{}", j[(0, 0)]);
        // Cov(u1, u2) has standard error T1 * 1 / sqrt(n)
        let se = t1 / (n as f64).sqrt();
        assert!(j[(0, 1)].abs() < 3.0 * n as f64 * se, "{}", j[(0, 1)]);
        assert!(j[(1, 0)].abs() < 3.0 * n as f64 * se / (t1 * t1), "{}", j[(1, 0)]);
    }

    #[test]
    fn delta_temperature_examples() {
        let jac = Matrix2::new(10.0, 0.0, 0.0, 5.0);
        assert_eq!(delta_temperatures(&jac, Vector2::zeros()).unwrap(), Vector2::zeros());
        let dt = delta_temperatures(&jac, Vector2::new(1.0, 1.0)).unwrap();
        assert_relative_eq!(dt[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(dt[1], 0.2, epsilon = 1e-15);
        assert!(matches!(
            delta_temperatures(&Matrix2::new(1.0, 1.0, 1.0, 1.0), Vector2::new(1.0, 0.0)),
            Err(SabcError::IllConditioned(_))
        ));
    }

    proptest! {
        #[test]
        fn delta_temperature_round_trip(
            a in 0.5f64..10.0, b in -0.4f64..0.4, c in -0.4f64..0.4, d in 0.5f64..10.0,
            u1 in -5.0f64..5.0, u2 in -5.0f64..5.0,
        ) {
            let jac = Matrix2::new(a, b, c, d);
            let du = Vector2::new(u1, u2);
            let back = jac * delta_temperatures(&jac, du).unwrap();
            prop_assert!((back - du).norm() < 1e-10);
        }
    }

    #[test]
    fn inverse_step_matches_chain_rule() {
        let e = ensemble(&[(0.1, 1.0), (0.7, 2.5), (0.4, 4.0), (0.2, 0.5), (0.9, 1.7)]);
        let (t1, t2) = (0.4, 1.3);
        let du = Vector2::new(-0.2, 0.05);
        let dt = delta_temperatures(&jacobian_u_t(&e, t1, t2).unwrap().matrix, du).unwrap();
        let dbeta = delta_inverse_temperatures(&e.particles, du).unwrap();
        assert_relative_eq!(dbeta[0], -dt[0] / (t1 * t1), max_relative = 1e-10);
        assert_relative_eq!(dbeta[1], -dt[1] / (t2 * t2), max_relative = 1e-10);
    }

    #[test]
    fn flat_recalibration() {
        let e = Ensemble::new(vec![particle(0.25, 0.0); 100]);
        let inv = recalibrate_temperatures(&e, &[], Regime::Flat).unwrap();
        assert_relative_eq!(1.0 / inv[0], 0.25, epsilon = 1e-12);
    }

    fn synthetic_store(m: usize, seed: u64) -> Vec<Particle> {
        let mut rng = RngStream::from_seed(seed);
        (0..m)
            .map(|_| {
                let u1 = 3.0 * rng.uniform();
                let u2 = 1.0 + rng.normal().abs() + 0.3 * u1;
                particle(u1, u2)
            })
            .collect()
    }

    #[test]
    fn recalibration_at_prior_state() {
        let store = synthetic_store(2000, 1);
        let e = Ensemble::new(store.clone());
        let inv = recalibrate_temperatures(&e, &store, Regime::General).unwrap();
        assert!(inv[0].abs() < 1e-9, "{inv:?}");
        assert!((inv[1] - 1.0).abs() < 1e-9, "{inv:?}");
    }

    #[test]
    fn recalibration_recovers_gibbs_reweighting() {
        let (t1, t2) = (0.5, 1.2);
        let m = 100_000;
        let store = synthetic_store(m, 2);
        // resample an ensemble from the store at the target temperatures
        let w: Vec<f64> = store
            .iter()
            .map(|p| (-p.u1 / t1 - p.u2 * (1.0 / t2 - 1.0)).exp())
            .collect();
        let total: f64 = w.iter().sum();
        let mut cdf = Vec::with_capacity(m);
        let mut acc = 0.0;
        for wi in &w {
            acc += wi / total;
            cdf.push(acc);
        }
        let mut rng = RngStream::from_seed(3);
        let parts = (0..m)
            .map(|_| {
                let u = rng.uniform();
                store[cdf.partition_point(|c| *c < u).min(m - 1)].clone()
            })
            .collect();
        let inv = recalibrate_temperatures(&Ensemble::new(parts), &store, Regime::General).unwrap();
        assert!((1.0 / inv[0] - t1).abs() < 0.02 * t1, "T1 {}", 1.0 / inv[0]);
        assert!((1.0 / inv[1] - t2).abs() < 0.02 * t2, "T2 {}", 1.0 / inv[1]);
    }

    #[test]
    fn recalibration_outside_hull_fails() {
        let store = synthetic_store(500, 4);
        // u1 below every store value: no finite temperature reproduces it
        let e = Ensemble::new(vec![particle(-1.0, 2.0); 10]);
        assert!(matches!(
            recalibrate_temperatures(&e, &store, Regime::General),
            Err(SabcError::RecalibrationFailed { .. })
        ));
    }

    #[test]
    fn pairwise_sum_matches_small_cases() {
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
    }
}
