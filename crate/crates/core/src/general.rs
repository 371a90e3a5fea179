//! Annealing with an informative prior: data energy and prior energy, each
//! with its own temperature. The prior temperature is held near one by a
//! counter force while the data temperature is lowered at a constant rate of
//! entropy production.

use log::{info, warn};
use nalgebra::Vector2;

use crate::config::RunConfig;
use crate::error::{Result, SabcError};
use crate::flat::{maybe_fit_summaries, prior_predictive, select_initial, RunResult, RunStatus};
use crate::kernel::Proposal;
use crate::model::Model;
use crate::rng::RngStream;
use crate::sumstats::SummarizedModel;
use crate::sweep::{self, Rule, SweepStats};
use crate::thermo::{
    delta_inverse_temperatures, estimate_onsager, recalibrate_temperatures, total_energy,
    EnergyKind, OnsagerMatrix, Regime, ThermoState, TraceFlags,
};
use crate::types::{prior_energy, EnergyFn, Ensemble, Particle};

/// Largest prior-side environmental temperature before the counter force is
/// declared runaway.
pub const T2E_CAP: f64 = 1e6;

/// Healthy band for the prior temperature.
const T2_BAND: (f64, f64) = (0.5, 2.0);

/// Counter-force environmental prior temperature:
/// `1/T2e - 1 = -a (1/T2 - 1)`.
///
/// Returns `(T2e, runaway)`; when the right side leaves no positive inverse
/// temperature, `T2e` is clamped to [`T2E_CAP`] and `runaway` is set.
pub fn counter_force_t2e(t2: f64, a: f64) -> (f64, bool) {
    let inv = 1.0 - a * (1.0 / t2 - 1.0);
    if inv > 1.0 / T2E_CAP {
        (1.0 / inv, false)
    } else {
        (T2E_CAP, true)
    }
}

/// Solution of the constant-entropy-rate condition for the data-side force.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateSolution {
    pub f1: f64,
    /// No real root: `f1` minimizes `|Fᵀ L F - v|` instead.
    pub unreachable: bool,
    /// `L11 = 0`: the condition is linear in `f1`.
    pub degenerate: bool,
}

/// Solve `L11 F1² + 2 L12 F1 F2 + L22 F2² = v` for `F1` on the cooling branch
/// `(L F)_1 < 0`.
pub fn solve_constant_entropy_rate(l: &OnsagerMatrix, f2: f64, v: f64) -> RateSolution {
    let (l11, l12, l22) = (l.l11(), l.l12(), l.l22());
    let b = l12 * f2;
    let c = l22 * f2 * f2 - v;
    if !(l11 > 0.0) {
        // linear in f1: 2 b f1 + c = 0
        let f1 = if b != 0.0 { -c / (2.0 * b) } else { 0.0 };
        return RateSolution {
            f1,
            unreachable: b == 0.0 && c != 0.0,
            degenerate: true,
        };
    }
    let disc = b * b - l11 * c;
    if disc < 0.0 {
        return RateSolution {
            f1: -b / l11,
            unreachable: true,
            degenerate: false,
        };
    }
    let root = disc.sqrt();
    // smaller root (-b - root)/l11, in a form free of cancellation
    let f1 = if b >= 0.0 {
        (-b - root) / l11
    } else {
        c / (-b + root)
    };
    RateSolution {
        f1,
        unreachable: false,
        degenerate: false,
    }
}

/// Metropolis decision at two temperatures, given as inverses so that an
/// infinite data temperature is representable.
pub fn accept_general(du1: f64, du2: f64, inv_te: [f64; 2], rng: &mut RngStream) -> bool {
    Rule::General { inv_te }.decide([du1, du2], 0.0, rng.uniform())
}

/// One sweep at inverse environmental temperatures `inv_te`.
pub fn sweep_general(
    ensemble: &mut Ensemble,
    proposal: &Proposal,
    model: &dyn Model,
    energy: &EnergyFn,
    inv_te: [f64; 2],
    rng: &mut RngStream,
) -> Result<SweepStats> {
    sweep::sweep(ensemble, proposal, model, energy, true, Rule::General { inv_te }, rng)
}

/// Initial two-temperature state. Returns the ensemble, trace row 0 and the
/// full prior-predictive store used for recalibration.
pub fn init_general(
    model: &dyn Model,
    config: &RunConfig,
    rng: &mut RngStream,
) -> Result<(Ensemble, ThermoState, Vec<Particle>)> {
    let (ensemble, state, store, _) = init_general_inner(model, config, rng)?;
    Ok((ensemble, state, store))
}

type Init = (Ensemble, ThermoState, Vec<Particle>, Option<crate::sumstats::SummaryMap>);

fn init_general_inner(model: &dyn Model, config: &RunConfig, rng: &mut RngStream) -> Result<Init> {
    config.validate()?;
    let (n, m) = (config.n_particles, config.init_oversample);
    let mut draws = prior_predictive(model, m, rng)?;
    let summaries = maybe_fit_summaries(model, config, &mut draws)?;
    let data = match &summaries {
        Some(map) => map.apply(model.data())?,
        None => model.data().clone(),
    };
    let alpha = config.alpha.unwrap_or_else(|| model.alpha());
    let store: Vec<Particle> = draws
        .into_iter()
        .map(|(theta, output)| {
            Ok(Particle {
                u1: crate::metric::rho_power(&output, &data, alpha)?,
                u2: prior_energy(model, &theta)?,
                theta,
                output,
            })
        })
        .collect::<Result<_>>()?;
    let chosen = select_initial(m, n, rng);
    let ensemble = Ensemble::new(chosen.into_iter().map(|i| store[i].clone()).collect());
    let state = ThermoState {
        sweep: 0,
        sims_used: m,
        u1_total: total_energy(&ensemble, EnergyKind::U1),
        u2_total: total_energy(&ensemble, EnergyKind::U2),
        t1: f64::INFINITY,
        t2: 1.0,
        te1: f64::INFINITY,
        te2: 1.0,
        acc_rate: 0.0,
        sigma_dot: 0.0,
        sigma_cum: 0.0,
        flags: TraceFlags::empty(),
    };
    Ok((ensemble, state, store, summaries))
}

/// `1/b`, with a zero inverse temperature meaning an infinite temperature.
fn inverse(b: f64) -> f64 {
    if b == 0.0 {
        f64::INFINITY
    } else {
        1.0 / b
    }
}

/// Anneal at constant entropy production rate with the prior counter force.
pub fn run_general(model: &dyn Model, config: &RunConfig, rng: &mut RngStream) -> Result<RunResult> {
    let (mut ensemble, state, store, summaries) = init_general_inner(model, config, rng)?;
    let summarized = summaries
        .as_ref()
        .map(|map| SummarizedModel::new(model, map.clone()))
        .transpose()?;
    let model: &dyn Model = match &summarized {
        Some(s) => s,
        None => model,
    };
    let energy = EnergyFn::raw(config.alpha.unwrap_or_else(|| model.alpha()));
    let n = config.n_particles;
    let n_probe = config.n_probe();
    let mut proposal = Proposal::for_ensemble(
        config.proposal,
        model,
        ensemble.thetas(),
        config.beta,
        config.s,
    )?;

    // inverse system temperatures (1/T1, 1/T2)
    let mut beta = Vector2::new(0.0, 1.0);
    let mut onsager: Option<OnsagerMatrix> = None;
    let mut force_recalibration = false;
    let mut trace = vec![state];

    let status = loop {
        let prev = trace.last().expect("trace starts with the initial row");
        let k = ensemble.sweep_count;
        let mut flags = TraceFlags::empty();
        if prev.u1_total == 0.0 {
            // every particle reproduces the data exactly: the system is at zero temperature
            break RunStatus::Converged;
        }
        let probe_now = k % config.onsager_period == 0 || onsager.is_none();
        let needed = n + if probe_now { n_probe } else { 0 };
        if prev.sims_used + needed > config.sim_budget {
            break RunStatus::BudgetExhausted;
        }
        let mut sims_used = prev.sims_used;

        if k > 0 && (force_recalibration || k % config.recalibration_period == 0) {
            match recalibrate_temperatures(&ensemble, &store, Regime::General) {
                Ok(b) => {
                    beta = Vector2::new(b[0], b[1]);
                    flags |= TraceFlags::RECALIBRATED;
                }
                Err(e) => {
                    warn!("sweep {k}: recalibration failed ({e}); keeping tracked temperatures");
                    flags |= TraceFlags::RECALIBRATION_FAILED;
                }
            }
            force_recalibration = false;
        }
        if config.adapt_covariance && k > 0 {
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
        if probe_now {
            let est = estimate_onsager(
                &ensemble,
                &proposal,
                model,
                &energy,
                [beta[0], beta[1]],
                n_probe,
                rng,
            )?;
            sims_used += est.sims_used;
            onsager = Some(est.matrix);
            flags |= TraceFlags::ONSAGER_UPDATED;
        }
        let l = onsager.expect("estimated on the first sweep");
        if l.l11() <= 0.0 {
            flags |= TraceFlags::DEGENERATE_ONSAGER;
        }

        // forces: prior side from the counter force, data side from the rate condition
        let (t2e, runaway) = counter_force_t2e(1.0 / beta[1], config.a);
        if runaway {
            flags |= TraceFlags::RUNAWAY_T2;
        }
        let f2 = beta[1] - 1.0 / t2e;
        let rate = solve_constant_entropy_rate(&l, f2, config.v);
        if rate.unreachable {
            flags |= TraceFlags::RATE_UNREACHABLE;
        }
        if rate.degenerate {
            flags |= TraceFlags::DEGENERATE_ONSAGER;
        }
        let inv_te1 = (beta[0] - rate.f1).max(0.0);
        let f1 = beta[0] - inv_te1;
        let inv_te = [inv_te1, 1.0 / t2e];
        let te1 = if inv_te1 > 0.0 { 1.0 / inv_te1 } else { f64::INFINITY };
        if te1 <= config.te_floor {
            break RunStatus::Converged;
        }

        let stats = sweep_general(&mut ensemble, &proposal, model, &energy, inv_te, rng)?;
        sims_used += stats.sims;
        let du = Vector2::new(stats.du[0], stats.du[1]);
        let sigma_dot = f1 * du[0] + f2 * du[1];

        match delta_inverse_temperatures(&ensemble.particles, du) {
            Ok(step) => {
                beta += step;
                beta[0] = beta[0].max(0.0);
                if !(beta[1] > 0.0) {
                    beta[1] = 1.0 / T2E_CAP;
                }
            }
            Err(_) => {
                flags |= TraceFlags::ILL_CONDITIONED;
                force_recalibration = true;
            }
        }
        let t2 = 1.0 / beta[1];
        if !(T2_BAND.0..=T2_BAND.1).contains(&t2) {
            flags |= TraceFlags::T2_OUT_OF_BAND;
        }

        let row = ThermoState {
            sweep: ensemble.sweep_count,
            sims_used,
            u1_total: total_energy(&ensemble, EnergyKind::U1),
            u2_total: total_energy(&ensemble, EnergyKind::U2),
            t1: inverse(beta[0]),
            t2,
            te1,
            te2: t2e,
            acc_rate: stats.accepted as f64 / n as f64,
            sigma_dot,
            sigma_cum: prev.sigma_cum + sigma_dot,
            flags,
        };
        if row.sweep % 10 == 0 {
            info!(
                "sweep {:>5}  sims {:>9}  T1 {:.4e}  T2 {:.4}  Te1 {:.4e}  Te2 {:.4}  acc {:.3}",
                row.sweep, row.sims_used, row.t1, row.t2, row.te1, row.te2, row.acc_rate
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
        transform: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    #[test]
    fn counter_force_examples() {
        assert_eq!(counter_force_t2e(1.0, 1.0), (1.0, false));
        let (t, r) = counter_force_t2e(2.0, 1.0);
        assert!((t - 2.0 / 3.0).abs() < 1e-15 && !r);
        let (t, r) = counter_force_t2e(0.5, 0.5);
        assert!((t - 2.0).abs() < 1e-15 && !r);
        // 1 - 3 (2 - 1) < 0
        assert_eq!(counter_force_t2e(0.5, 3.0), (T2E_CAP, true));
    }

    proptest! {
        #[test]
        fn counter_force_pushes_across_one(t2 in 0.6f64..1.8, a in 0.01f64..0.9) {
            let (t2e, runaway) = counter_force_t2e(t2, a);
            prop_assert!(!runaway);
            let (x, y) = (1.0 / t2 - 1.0, 1.0 / t2e - 1.0);
            prop_assert!(x * y <= 0.0);
        }
    }

    fn onsager(m: [[f64; 2]; 2]) -> OnsagerMatrix {
        OnsagerMatrix(Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]))
    }

    #[test]
    fn rate_examples() {
        let s = solve_constant_entropy_rate(&onsager([[2.0, 0.0], [0.0, 1.0]]), 0.0, 0.08);
        assert!((s.f1 + 0.2).abs() < 1e-15);
        let s = solve_constant_entropy_rate(&onsager([[2.0, 0.0], [0.0, 1.0]]), 0.0, 0.0);
        assert_eq!(s.f1, 0.0);

        let l = onsager([[2.0, 0.5], [0.5, 1.0]]);
        let s = solve_constant_entropy_rate(&l, 0.1, 0.1);
        // independent quadratic-formula oracle for 2 F1² + 0.1 F1 - 0.09 = 0
        let oracle = (-0.1 - (0.01f64 + 4.0 * 2.0 * 0.09).sqrt()) / 4.0;
        assert!((s.f1 - oracle).abs() < 1e-14);
        assert!((s.f1 + 0.238).abs() < 1e-3);
        let q = 2.0 * s.f1 * s.f1 + 2.0 * 0.5 * s.f1 * 0.1 + 0.01;
        assert!((q - 0.1).abs() < 1e-12);
        assert!(2.0 * s.f1 + 0.5 * 0.1 < 0.0);
    }

    #[test]
    fn unreachable_rate_is_flagged() {
        // F2 alone already produces more than v
        let s = solve_constant_entropy_rate(&onsager([[1.0, 0.5], [0.5, 1.0]]), 1.0, 0.1);
        assert!(s.unreachable);
        assert!((s.f1 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_onsager_falls_back_to_linear() {
        let s = solve_constant_entropy_rate(&onsager([[0.0, 0.5], [0.5, 1.0]]), 0.2, 0.1);
        assert!(s.degenerate);
        assert!((2.0 * 0.5 * s.f1 * 0.2 + 0.04 - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rate_condition_holds(
            l11 in 0.01f64..10.0, l22 in 0.01f64..10.0, r in -0.99f64..0.99,
            f2 in -1.0f64..1.0, v in 0.001f64..5.0,
        ) {
            let l12 = r * (l11 * l22).sqrt();
            let l = onsager([[l11, l12], [l12, l22]]);
            let s = solve_constant_entropy_rate(&l, f2, v);
            if !s.unreachable {
                let q = l11 * s.f1 * s.f1 + 2.0 * l12 * s.f1 * f2 + l22 * f2 * f2;
                prop_assert!((q - v).abs() <= 1e-12 * v.max(q), "q {} v {}", q, v);
                prop_assert!(l11 * s.f1 + l12 * f2 <= 0.0);
            }
        }
    }

    #[test]
    fn acceptance_examples() {
        let mut rng = RngStream::from_seed(3);
        for _ in 0..1000 {
            assert!(accept_general(-0.1, -0.3, [2.0, 1.0], &mut rng));
        }
        // du1/Te1 + du2/Te2 = 1
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| accept_general(0.25, 0.5, [2.0, 1.0], &mut rng))
            .count();
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * se);
        // infinite data temperature: only the prior energy matters
        let a = (0..n)
            .filter(|_| accept_general(1e6, 0.5, [0.0, 2.0], &mut rng))
            .count();
        assert!((a as f64 / n as f64 - p).abs() < 3.0 * se);
    }

    use crate::models::{BetaBinomial, GaussMean};
    use crate::types::{OutputPoint, ParameterPoint};
    use statrs::function::gamma::{digamma, ln_gamma};

    /// `E[-ln f(θ)]` for θ ~ Beta(a, b).
    fn beta_entropy(a: f64, b: f64) -> f64 {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
            + (a + b - 2.0) * digamma(a + b)
    }

    #[test]
    fn initial_prior_energy_is_the_prior_entropy() {
        let model = BetaBinomial::new(20, 12, 2.0, 5.0).unwrap();
        let mut config = RunConfig::new(1000, 1);
        config.init_oversample = 10_000;
        let (ens, state, store) = init_general(&model, &config, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(store.len(), 10_000);
        assert_eq!(ens.len(), 1000);
        assert_eq!(state.sims_used, 10_000);
        assert_eq!((state.t1, state.t2), (f64::INFINITY, 1.0));
        let u2: Vec<f64> = store.iter().map(|p| p.u2).collect();
        let se = crate::stats::std_dev(&u2) / (u2.len() as f64).sqrt();
        let exact = beta_entropy(2.0, 5.0);
        assert!((crate::stats::mean(&u2) - exact).abs() < 3.0 * se);
    }

    #[test]
    fn constant_prior_energy_reduces_to_the_flat_sweep() {
        let model = GaussMean::new(1.0, 5, 0.0, 10.0).unwrap();
        let config = RunConfig::new(2000, 2);
        let (ens, _, _) = init_general(&model, &config, &mut RngStream::from_seed(2)).unwrap();
        let proposal =
            Proposal::for_ensemble(config.proposal, &model, ens.thetas(), 0.1, config.s).unwrap();
        let energy = EnergyFn::raw(model.alpha());
        let te = 0.05;
        let (mut a, mut b) = (ens.clone(), ens);
        let mut ra = RngStream::from_seed(3);
        let mut rb = RngStream::from_seed(3);
        for _ in 0..5 {
            let sa = sweep_general(&mut a, &proposal, &model, &energy, [1.0 / te, 0.7], &mut ra).unwrap();
            let sb = crate::flat::sweep_flat(&mut b, &proposal, &model, &energy, te, &mut rb).unwrap();
            assert_eq!(sa.accepted, sb.accepted);
            assert_eq!(sa.du[0], sb.du[0]);
            assert_eq!(sa.du[1], 0.0);
            assert!(sa.accepted > 0 && sa.accepted < 2000);
            let thetas = |e: &Ensemble| e.thetas().cloned().collect::<Vec<_>>();
            assert_eq!(thetas(&a), thetas(&b));
        }
    }

    #[test]
    fn hot_sweep_accepts_everything_and_accounts_exactly() {
        let model = Uninformative {
            data: OutputPoint::Continuous(vec![0.0]),
        };
        let config = RunConfig::new(1000, 4);
        let (mut ens, _, _) = init_general(&model, &config, &mut RngStream::from_seed(4)).unwrap();
        let before = ens.clone();
        let proposal =
            Proposal::for_ensemble(config.proposal, &model, ens.thetas(), config.beta, config.s).unwrap();
        let stats = sweep_general(&mut ens, &proposal, &model, &EnergyFn::raw(2.0), [0.0, 0.0], &mut RngStream::from_seed(5))
            .unwrap();
        assert_eq!(stats.accepted, 1000);
        let d1: f64 = ens.particles.iter().zip(&before.particles).map(|(x, y)| x.u1 - y.u1).sum();
        let d2: f64 = ens.particles.iter().zip(&before.particles).map(|(x, y)| x.u2 - y.u2).sum();
        assert!((stats.du[0] - d1).abs() < 1e-9);
        assert!((stats.du[1] - d2).abs() < 1e-9);
    }

    /// Standard normal prior; the output ignores θ entirely.
    struct Uninformative {
        data: OutputPoint,
    }

    impl Model for Uninformative {
        fn name(&self) -> &str {
            "uninformative"
        }
        fn dim(&self) -> usize {
            1
        }
        fn data(&self) -> &OutputPoint {
            &self.data
        }
        fn simulate(&self, _: &ParameterPoint, rng: &mut RngStream) -> Result<OutputPoint> {
            Ok(OutputPoint::Continuous(vec![rng.normal()]))
        }
        fn prior_sample(&self, rng: &mut RngStream) -> ParameterPoint {
            ParameterPoint::scalar(rng.normal())
        }
        fn prior_log_density(&self, theta: &ParameterPoint) -> Option<f64> {
            let t = theta.coords()[0];
            Some(-0.5 * t * t - 0.5 * (2.0 * std::f64::consts::PI).ln())
        }
        fn informative_prior(&self) -> bool {
            true
        }
    }

    #[test]
    fn uninformative_likelihood_leaves_the_prior() {
        let model = Uninformative {
            data: OutputPoint::Continuous(vec![0.0]),
        };
        let n = 2000;
        let mut config = RunConfig::new(n, 6);
        // slow enough for the ensemble to follow the environment
        config.v = 0.02;
        config.sim_budget = config.init_oversample + 60 * (n + config.n_probe());
        let res = run_general(&model, &config, &mut RngStream::from_seed(6)).unwrap();
        assert!(res.trace.len() > 30);
        let u2: Vec<f64> = res.ensemble.particles.iter().map(|p| p.u2).collect();
        // -ln φ(θ) has mean (1 + ln 2π)/2 and variance 1/2 under the prior
        let exact = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        let se = (0.5 / n as f64).sqrt();
        let mean = crate::stats::mean(&u2);
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact}");
        let t2 = res.trace.last().unwrap().t2;
        assert!((0.5..=2.0).contains(&t2));
    }

    #[test]
    fn trace_accumulates_exactly() {
        let model = BetaBinomial::new(20, 12, 2.0, 5.0).unwrap();
        let mut config = RunConfig::new(500, 7);
        config.sim_budget = 60_000;
        let res = run_general(&model, &config, &mut RngStream::from_seed(7)).unwrap();
        assert!(res.trace.len() > 20);
        for w in res.trace.windows(2) {
            assert_eq!(w[1].sigma_cum, w[0].sigma_cum + w[1].sigma_dot);
            assert_eq!(w[1].sweep, w[0].sweep + 1);
            assert!(w[1].sims_used > w[0].sims_used);
        }
        assert!(res.trace[1].flags.contains(TraceFlags::ONSAGER_UPDATED));
        assert!(res.trace.last().unwrap().sims_used <= config.sim_budget);
        let again = run_general(&model, &config, &mut RngStream::from_seed(7)).unwrap();
        assert_eq!(res.ensemble, again.ensemble);
    }
}
