//! Annealing under negligible prior knowledge: one temperature, uniform-prior
//! energies and the adaptive quartic schedule.

use log::info;
use rand::seq::index;

use crate::config::RunConfig;
use crate::error::{Result, SabcError};
use crate::kernel::Proposal;
use crate::metric::EnergyTransform;
use crate::model::Model;
use crate::rng::RngStream;
use crate::sumstats::{SummarizedModel, SummaryMap};
use crate::sweep::{self, Rule, SweepStats};
use crate::thermo::{total_energy, EnergyKind, ThermoState, TraceFlags};
use crate::types::{EnergyFn, Ensemble, OutputPoint, Particle, ParameterPoint};

const SCHEDULE_MAX_ITER: usize = 400;

/// Environmental temperature minimizing entropy production at mean energy
/// `u_mean` and speed `v`: the root `Te ∈ (0, u_mean)` of
/// `(u_mean² - Te²)² / (2 Te³) = v`.
///
/// The left side falls strictly from `+∞` to 0 on that interval, so the root
/// is unique; it is bracketed by bisection until the residual is below
/// `1e-12 v` or the bracket cannot shrink further.
pub fn solve_schedule_quartic(u_mean: f64, v: f64) -> Result<f64> {
    if !(u_mean > 0.0) || !u_mean.is_finite() {
        return Err(SabcError::InvalidArgument(format!(
            "mean energy must be > 0, got {u_mean}"
        )));
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(SabcError::InvalidArgument(format!(
            "annealing speed must be > 0, got {v}"
        )));
    }
    let lhs = |te: f64| {
        let gap = (u_mean - te) * (u_mean + te);
        gap * gap / (2.0 * te * te * te)
    };
    let (mut lo, mut hi) = (0.0, u_mean);
    let mut mid = 0.5 * u_mean;
    for _ in 0..SCHEDULE_MAX_ITER {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = lhs(mid) - v;
        if r.abs() <= 1e-12 * v {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Metropolis decision at one temperature: accept with probability
/// `min(1, exp(-(u_new - u_old)/te))`; at `te = 0` only strict descents pass.
pub fn accept_flat(u_old: f64, u_new: f64, te: f64, rng: &mut RngStream) -> bool {
    Rule::Flat { te }.decide([u_new - u_old, 0.0], 0.0, rng.uniform())
}

/// One sweep at environmental temperature `te`.
pub fn sweep_flat(
    ensemble: &mut Ensemble,
    proposal: &Proposal,
    model: &dyn Model,
    energy: &EnergyFn,
    te: f64,
    rng: &mut RngStream,
) -> Result<SweepStats> {
    sweep::sweep(ensemble, proposal, model, energy, false, Rule::Flat { te }, rng)
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    /// The environmental temperature reached the configured floor.
    Converged,
    /// The simulation budget ran out first.
    BudgetExhausted,
}

/// Outcome of an annealing run.
#[derive(Clone, Debug)]
pub struct RunResult {
    /// Final ensemble; its θ-marginal is the posterior sample.
    pub ensemble: Ensemble,
    /// One row per sweep, row 0 being the initialized state.
    pub trace: Vec<ThermoState>,
    pub status: RunStatus,
    /// Summary statistics fitted during initialization, if any.
    pub summaries: Option<SummaryMap>,
    /// Energy transform (flat case).
    pub transform: Option<EnergyTransform>,
}

/// `M` prior-predictive draws, each on its own substream.
pub(crate) fn prior_predictive(
    model: &dyn Model,
    m: usize,
    rng: &mut RngStream,
) -> Result<Vec<(ParameterPoint, OutputPoint)>> {
    use rayon::prelude::*;
    let family = rng.split();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let mut r = family.stream(i as u64);
            let theta = model.prior_sample(&mut r);
            let x = model.simulate(&theta, &mut r)?;
            Ok((theta, x))
        })
        .collect()
}

/// Fit summaries on the pilot draws when the configuration asks for them
/// and the output is larger than the parameter.
pub(crate) fn maybe_fit_summaries(
    model: &dyn Model,
    config: &RunConfig,
    draws: &mut [(ParameterPoint, OutputPoint)],
) -> Result<Option<SummaryMap>> {
    use crate::config::SummaryMode;
    if config.summaries != SummaryMode::Auto || model.data().dim() <= model.dim() {
        return Ok(None);
    }
    let thetas: Vec<Vec<f64>> = draws.iter().map(|(t, _)| t.coords().to_vec()).collect();
    let outputs: Vec<Vec<f64>> = draws.iter().map(|(_, x)| x.to_vec()).collect();
    let map = crate::sumstats::fit_linear_summaries(&thetas, &outputs)?;
    for (_, x) in draws.iter_mut() {
        *x = map.apply(x)?;
    }
    info!(
        "fitted linear summaries: output dimension {} -> {}",
        map.input_dim(),
        map.output_dim()
    );
    Ok(Some(map))
}

/// Indices of the initial ensemble within the `m` pilot draws.
pub(crate) fn select_initial(m: usize, n: usize, rng: &mut RngStream) -> Vec<usize> {
    if m == n {
        return (0..n).collect();
    }
    let mut idx = index::sample(rng, m, n).into_vec();
    idx.sort_unstable();
    idx
}

/// Initial flat-case state: ensemble, energy transform, trace row 0.
pub fn init_flat(
    model: &dyn Model,
    config: &RunConfig,
    rng: &mut RngStream,
) -> Result<(Ensemble, EnergyTransform, ThermoState)> {
    let (ensemble, transform, state, _) = init_flat_with_summaries(model, config, rng)?;
    Ok((ensemble, transform, state))
}

fn init_flat_with_summaries(
    model: &dyn Model,
    config: &RunConfig,
    rng: &mut RngStream,
) -> Result<(Ensemble, EnergyTransform, ThermoState, Option<SummaryMap>)> {
    config.validate()?;
    let (n, m) = (config.n_particles, config.init_oversample);
    let mut draws = prior_predictive(model, m, rng)?;
    let summaries = maybe_fit_summaries(model, config, &mut draws)?;
    let data = match &summaries {
        Some(map) => map.apply(model.data())?,
        None => model.data().clone(),
    };
    let alpha = config.alpha.unwrap_or_else(|| model.alpha());
    let distances: Vec<f64> = draws
        .iter()
        .map(|(_, x)| crate::metric::rho_power(x, &data, alpha))
        .collect::<Result<_>>()?;
    let transform = EnergyTransform::build(distances.clone())?;

    let chosen = select_initial(m, n, rng);
    let particles = chosen
        .into_iter()
        .map(|i| Particle {
            theta: draws[i].0.clone(),
            output: draws[i].1.clone(),
            u1: transform.apply(distances[i]),
            u2: 0.0,
        })
        .collect();
    let ensemble = Ensemble::new(particles);
    let u1_total = total_energy(&ensemble, EnergyKind::U1);
    let t1 = u1_total / n as f64;
    let te1 = environment(config, t1)?;
    let state = ThermoState {
        sweep: 0,
        sims_used: m,
        u1_total,
        u2_total: 0.0,
        t1,
        t2: 1.0,
        te1,
        te2: 1.0,
        acc_rate: 0.0,
        sigma_dot: 0.0,
        sigma_cum: 0.0,
        flags: if transform.degenerate {
            TraceFlags::DEGENERATE_TRANSFORM
        } else {
            TraceFlags::empty()
        },
    };
    Ok((ensemble, transform, state, summaries))
}

fn environment(config: &RunConfig, t1: f64) -> Result<f64> {
    match config.fixed_te {
        Some(te) => Ok(te),
        None if t1 > 0.0 => solve_schedule_quartic(t1, config.v),
        // every particle sits on the data: nothing left to anneal
        None => Ok(0.0),
    }
}

/// Anneal with the adaptive quartic schedule until the budget is spent or the
/// environmental temperature reaches the floor.
pub fn run_flat(model: &dyn Model, config: &RunConfig, rng: &mut RngStream) -> Result<RunResult> {
    let (mut ensemble, transform, state, summaries) =
        init_flat_with_summaries(model, config, rng)?;
    let summarized = summaries
        .as_ref()
        .map(|map| SummarizedModel::new(model, map.clone()))
        .transpose()?;
    let model: &dyn Model = match &summarized {
        Some(s) => s,
        None => model,
    };
    let energy = EnergyFn {
        alpha: config.alpha.unwrap_or_else(|| model.alpha()),
        transform: Some(transform.clone()),
    };
    let n = config.n_particles;
    let mut proposal = Proposal::for_ensemble(
        config.proposal,
        model,
        ensemble.thetas(),
        config.beta,
        config.s,
    )?;

    // row k carries the temperature that drove sweep k; the next one is kept here
    let mut te_next = state.te1;
    let mut trace = vec![state];
    let status = loop {
        let prev = trace.last().expect("trace starts with the initial row");
        if te_next <= config.te_floor {
            break RunStatus::Converged;
        }
        if prev.sims_used + n > config.sim_budget {
            break RunStatus::BudgetExhausted;
        }
        let mut flags = TraceFlags::empty();
        if config.adapt_covariance && ensemble.sweep_count > 0 {
            match Proposal::for_ensemble(
                config.proposal,
                model,
                ensemble.thetas(),
                config.beta,
                config.s,
            ) {
                Ok(p) => proposal = p,
                Err(SabcError::DegenerateKernel) => flags |= TraceFlags::DEGENERATE_KERNEL,
                Err(e) => return Err(e),
            }
        }
        let (t1, te1) = (prev.t1, te_next);
        let stats = sweep_flat(&mut ensemble, &proposal, model, &energy, te1, rng)?;
        let sigma_dot = stats.du[0] * (1.0 / t1 - 1.0 / te1);
        let u1_total = total_energy(&ensemble, EnergyKind::U1);
        let t1_next = u1_total / n as f64;
        te_next = environment(config, t1_next)?;
        let row = ThermoState {
            sweep: ensemble.sweep_count,
            sims_used: prev.sims_used + stats.sims,
            u1_total,
            u2_total: 0.0,
            t1: t1_next,
            t2: 1.0,
            te1,
            te2: 1.0,
            acc_rate: stats.accepted as f64 / n as f64,
            sigma_dot,
            sigma_cum: prev.sigma_cum + sigma_dot,
            flags,
        };
        if row.sweep % 10 == 0 {
            info!(
                "sweep {:>5}  sims {:>9}  T1 {:.4e}  Te1 {:.4e}  acc {:.3}",
                row.sweep, row.sims_used, row.t1, row.te1, row.acc_rate
            );
        }
        trace.push(row);
    };
    if status == RunStatus::BudgetExhausted {
        if let Some(last) = trace.last_mut() {
            last.flags |= TraceFlags::BUDGET_EXHAUSTED;
        }
    }
    Ok(RunResult {
        ensemble,
        trace,
        status,
        summaries,
        transform: Some(transform),
    })
}
