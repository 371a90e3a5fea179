//! Reference samplers: plain rejection ABC, the idealized infinitely fast
//! mixing annealer, and the probe of the adaptive schedule's asymptotics.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Result, SabcError};
use crate::flat::{run_flat, RunResult};
use crate::metric::rho_power;
use crate::model::Model;
use crate::rng::RngStream;
use crate::stats::log_log_slope;
use crate::types::ParameterPoint;

const REJECTION_BATCH: usize = 4096;

#[derive(Clone, Debug)]
pub struct RejectionResult {
    pub samples: Vec<ParameterPoint>,
    /// Index of each accepted draw in the stream of simulations.
    pub accepted_draws: Vec<usize>,
    pub sims: usize,
    pub acceptance_rate: f64,
}

/// Keep prior draws whose simulated output lies within `tolerance` of the data.
///
/// Draw `i` always uses substream `i`, so runs with different tolerances
/// share their randomness draw by draw.
pub fn rejection_abc(
    model: &dyn Model,
    tolerance: f64,
    n_accept_target: usize,
    max_sims: usize,
    rng: &mut RngStream,
) -> Result<RejectionResult> {
    if !(tolerance >= 0.0) {
        return Err(SabcError::InvalidArgument(format!(
            "tolerance must be >= 0, got {tolerance}"
        )));
    }
    let alpha = model.alpha();
    let family = rng.split();
    let mut samples = Vec::new();
    let mut accepted_draws = Vec::new();
    let mut sims = 0;
    while samples.len() < n_accept_target && sims < max_sims {
        let batch = REJECTION_BATCH.min(max_sims - sims);
        let draws: Vec<Option<ParameterPoint>> = (sims..sims + batch)
            .into_par_iter()
            .map(|i| {
                let mut r = family.stream(i as u64);
                let theta = model.prior_sample(&mut r);
                let x = model.simulate(&theta, &mut r)?;
                Ok((rho_power(&x, model.data(), alpha)? <= tolerance).then_some(theta))
            })
            .collect::<Result<_>>()?;
        let start = sims;
        sims += batch;
        for (offset, d) in draws.into_iter().enumerate() {
            if let Some(theta) = d {
                samples.push(theta);
                accepted_draws.push(start + offset);
                if samples.len() == n_accept_target {
                    // draws past the last acceptance were never needed
                    sims = start + offset + 1;
                    break;
                }
            }
        }
    }
    if samples.is_empty() {
        log::warn!("rejection ABC accepted nothing in {sims} simulations (tolerance {tolerance})");
    }
    Ok(RejectionResult {
        acceptance_rate: if sims > 0 {
            samples.len() as f64 / sims as f64
        } else {
            0.0
        },
        samples,
        accepted_draws,
        sims,
    })
}

const IDEAL_CHUNK: usize = 1024;

/// Mean energy after each step of the zero-temperature, infinitely fast
/// mixing limit: every particle redraws a uniform energy and keeps it only if
/// it is lower. Entry 0 is the initial mean.
pub fn ideal_fast_anneal(n_particles: usize, n_steps: usize, rng: &mut RngStream) -> Vec<f64> {
    if n_particles == 0 {
        return vec![f64::NAN; n_steps + 1];
    }
    let family = rng.split();
    let chunks: Vec<Vec<f64>> = (0..n_particles.div_ceil(IDEAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sums = vec![0.0; n_steps + 1];
            for p in c * IDEAL_CHUNK..((c + 1) * IDEAL_CHUNK).min(n_particles) {
                let mut r = family.stream(p as u64);
                let mut u = r.uniform();
                sums[0] += u;
                for s in sums.iter_mut().skip(1) {
                    let next = r.uniform();
                    if next < u {
                        u = next;
                    }
                    *s += u;
                }
            }
            sums
        })
        .collect();
    let mut total = vec![0.0; n_steps + 1];
    for chunk in &chunks {
        for (t, s) in total.iter_mut().zip(chunk) {
            *t += s;
        }
    }
    total.iter().map(|s| s / n_particles as f64).collect()
}

/// Energy path of one particle in the idealized limit (for pathwise checks).
pub fn ideal_particle_path(n_steps: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut u = rng.uniform();
    let mut path = Vec::with_capacity(n_steps + 1);
    path.push(u);
    for _ in 0..n_steps {
        let next = rng.uniform();
        if next < u {
            u = next;
        }
        path.push(u);
    }
    path
}

#[derive(Clone, Debug)]
pub struct AsymptoticsProbe {
    /// Least-squares slope of `ln Te` against `ln sweep` over the final decade.
    pub slope: f64,
    pub sweeps: usize,
    pub run: RunResult,
}

/// Minimum number of sweeps (two decades) for a meaningful slope.
pub const MIN_PROBE_SWEEPS: usize = 100;

/// Slope of `ln Te` against `ln sweep` over sweeps `[S/10, S]` of a trace.
pub fn final_decade_slope(sweeps: &[usize], te: &[f64]) -> Result<f64> {
    let last = sweeps.iter().copied().max().unwrap_or(0);
    if last < MIN_PROBE_SWEEPS {
        return Err(SabcError::TraceTooShort {
            sweeps: last,
            needed: MIN_PROBE_SWEEPS,
        });
    }
    let from = last / 10;
    let (ts, ys): (Vec<f64>, Vec<f64>) = sweeps
        .iter()
        .zip(te)
        .filter(|(s, _)| **s >= from)
        .map(|(s, t)| (*s as f64, *t))
        .unzip();
    log_log_slope(&ts, &ys)
}

/// Run the flat annealer and fit the decay exponent of its schedule.
pub fn schedule_asymptotics_probe(
    model: &dyn Model,
    config: &RunConfig,
    rng: &mut RngStream,
) -> Result<AsymptoticsProbe> {
    let run = run_flat(model, config, rng)?;
    let rows: Vec<_> = run.trace.iter().filter(|r| r.sweep >= 1).collect();
    let sweeps: Vec<usize> = rows.iter().map(|r| r.sweep).collect();
    let te: Vec<f64> = rows.iter().map(|r| r.te1).collect();
    let slope = final_decade_slope(&sweeps, &te)?;
    Ok(AsymptoticsProbe {
        slope,
        sweeps: sweeps.last().copied().unwrap_or(0),
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BetaBinomial, GaussMean};
    use crate::stats::ks_two_sample;

    #[test]
    fn infinite_tolerance_returns_the_prior() {
        let model = BetaBinomial::new(20, 12, 2.0, 5.0).unwrap();
        let mut rng = RngStream::from_seed(1);
        let res = rejection_abc(&model, f64::INFINITY, 2000, 10_000, &mut rng).unwrap();
        assert_eq!(res.sims, 2000);
        assert_eq!(res.acceptance_rate, 1.0);
        let abc: Vec<f64> = res.samples.iter().map(|t| t.coords()[0]).collect();
        let fresh: Vec<f64> = (0..2000)
            .map(|_| model.prior_sample(&mut rng).coords()[0])
            .collect();
        // 1% critical value of the two-sample KS statistic for n = m = 2000
        let crit = 1.628 * (2.0 / 2000.0f64).sqrt();
        assert!(ks_two_sample(&abc, &fresh) < crit);
    }

    #[test]
    fn zero_tolerance_on_continuous_output_accepts_nothing() {
        let model = GaussMean::new(1.0, 5, 0.0, 10.0).unwrap();
        let mut rng = RngStream::from_seed(2);
        let res = rejection_abc(&model, 0.0, 10, 5000, &mut rng).unwrap();
        assert!(res.samples.is_empty());
        assert_eq!(res.sims, 5000);
        assert_eq!(res.acceptance_rate, 0.0);
    }

    #[test]
    fn accepted_sets_grow_with_tolerance() {
        let model = GaussMean::new(1.0, 5, 0.0, 10.0).unwrap();
        let run = |tol: f64| {
            let mut rng = RngStream::from_seed(9);
            rejection_abc(&model, tol, usize::MAX, 20_000, &mut rng)
                .unwrap()
                .accepted_draws
        };
        let (small, large) = (run(0.01), run(0.1));
        assert!(!small.is_empty());
        assert!(small.iter().all(|i| large.contains(i)));
    }

    #[test]
    fn ideal_anneal_starts_uniform_and_decreases() {
        let n = 100_000;
        let trace = ideal_fast_anneal(n, 50, &mut RngStream::from_seed(3));
        assert_eq!(trace.len(), 51);
        assert!((trace[0] - 0.5).abs() < 3.0 / (12.0 * n as f64).sqrt());
        let smooth: Vec<f64> = trace.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
        assert!(smooth.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ideal_anneal_is_deterministic() {
        let a = ideal_fast_anneal(5000, 20, &mut RngStream::from_seed(4));
        let b = ideal_fast_anneal(5000, 20, &mut RngStream::from_seed(4));
        assert_eq!(a, b);
    }

    #[test]
    fn particle_paths_never_increase() {
        let mut rng = RngStream::from_seed(5);
        for _ in 0..100 {
            let path = ideal_particle_path(200, &mut rng);
            assert!(path.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn slope_fit_on_exact_power_law() {
        let sweeps: Vec<usize> = (1..=300).collect();
        let te: Vec<f64> = sweeps.iter().map(|s| 0.7 * (*s as f64).powf(-4.0 / 3.0)).collect();
        let slope = final_decade_slope(&sweeps, &te).unwrap();
        assert!((slope + 4.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn short_traces_are_rejected() {
        let sweeps: Vec<usize> = (1..=50).collect();
        let te = vec![0.1; 50];
        assert!(matches!(
            final_decade_slope(&sweeps, &te),
            Err(SabcError::TraceTooShort { .. })
        ));
    }
}
