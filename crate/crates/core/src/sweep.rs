//! One Metropolis update of every particle, shared by both annealers.

use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::Proposal;
use crate::model::Model;
use crate::rng::RngStream;
use crate::thermo::pairwise_sum;
use crate::types::{prior_energy, Ensemble, EnergyFn, Particle};

/// Acceptance rule of a sweep.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Rule {
    /// Single environmental temperature; `te = 0` accepts strict descents only.
    Flat { te: f64 },
    /// Inverse environmental temperatures `(1/Te1, 1/Te2)`.
    General { inv_te: [f64; 2] },
}

impl Rule {
    /// Decide with the uniform variate `u` already drawn.
    pub(crate) fn decide(self, du: [f64; 2], log_correction: f64, u: f64) -> bool {
        let log_alpha = match self {
            Rule::Flat { te } if te == 0.0 => {
                return du[0] < 0.0;
            }
            Rule::Flat { te } => -(1.0 / te) * du[0] + log_correction,
            Rule::General { inv_te } => {
                -inv_te[0] * du[0] - inv_te[1] * du[1] + log_correction
            }
        };
        u < log_alpha.exp()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepStats {
    pub accepted: usize,
    /// Simulator calls made (proposals outside the support are not simulated).
    pub sims: usize,
    /// Change of the total energies `(ΔU1, ΔU2)`.
    pub du: [f64; 2],
}

struct Step {
    next: Option<Particle>,
    simulated: bool,
    du: nalgebra::Vector2<f64>,
}

/// Attempt one move per particle, each on its own substream.
pub(crate) fn sweep(
    ensemble: &mut Ensemble,
    proposal: &Proposal,
    model: &dyn Model,
    energy: &EnergyFn,
    with_prior: bool,
    rule: Rule,
    rng: &mut RngStream,
) -> Result<SweepStats> {
    let family = rng.split();
    let steps: Vec<Step> = ensemble
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Step> {
            let mut r = family.stream(i as u64);
            let Some(cand) = proposal.propose(model, &p.theta, &mut r) else {
                return Ok(Step {
                    next: None,
                    simulated: false,
                    du: nalgebra::Vector2::zeros(),
                });
            };
            let output = model.simulate(&cand.theta, &mut r)?;
            let u1 = energy.energy(model, &output)?;
            let u2 = if with_prior {
                prior_energy(model, &cand.theta)?
            } else {
                0.0
            };
            let du = [u1 - p.u1, u2 - p.u2];
            let accept = rule.decide(du, cand.log_correction, r.uniform());
            Ok(if accept {
                Step {
                    next: Some(Particle {
                        theta: cand.theta,
                        output,
                        u1,
                        u2,
                    }),
                    simulated: true,
                    du: nalgebra::Vector2::new(du[0], du[1]),
                }
            } else {
                Step {
                    next: None,
                    simulated: true,
                    du: nalgebra::Vector2::zeros(),
                }
            })
        })
        .collect::<Result<_>>()?;

    let mut stats = SweepStats::default();
    let mut deltas = Vec::with_capacity(steps.len());
    for (slot, step) in ensemble.particles.iter_mut().zip(steps) {
        stats.sims += usize::from(step.simulated);
        deltas.push(step.du);
        if let Some(next) = step.next {
            *slot = next;
            stats.accepted += 1;
        }
    }
    let du = pairwise_sum(&deltas);
    stats.du = [du[0], du[1]];
    ensemble.sweep_count += 1;
    Ok(stats)
}
