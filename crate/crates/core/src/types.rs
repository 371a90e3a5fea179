//! Particles, ensembles and the points they carry.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SabcError};
use crate::metric::{rho_power, EnergyTransform};
use crate::model::Model;

/// A point θ in parameter space, in the model's natural coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    coords: Vec<f64>,
}

impl ParameterPoint {
    /// Panics on non-finite coordinates; parameters are never allowed to be NaN or infinite.
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(
            coords.iter().all(|c| c.is_finite()),
            "parameter coordinates must be finite: {coords:?}"
        );
        Self { coords }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(vec![value])
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A model output x: a real vector, or a count for discrete-output models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OutputPoint {
    Continuous(Vec<f64>),
    Count(u64),
}

impl OutputPoint {
    pub fn dim(&self) -> usize {
        match self {
            OutputPoint::Continuous(v) => v.len(),
            OutputPoint::Count(_) => 1,
        }
    }

    /// Output as reals (a count becomes a one-element vector).
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            OutputPoint::Continuous(v) => v.clone(),
            OutputPoint::Count(k) => vec![*k as f64],
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            OutputPoint::Continuous(v) => v.iter().all(|x| x.is_finite()),
            OutputPoint::Count(_) => true,
        }
    }
}

/// One member of the moving ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub theta: ParameterPoint,
    pub output: OutputPoint,
    /// Data-distance energy.
    pub u1: f64,
    /// Prior energy, `-ln f_pri(theta)`; zero when the prior is flat.
    pub u2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub sweep_count: usize,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self {
            particles,
            sweep_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.dim())
    }

    pub fn thetas(&self) -> impl Iterator<Item = &ParameterPoint> {
        self.particles.iter().map(|p| &p.theta)
    }
}

/// How the data-distance energy u1 is computed from an output.
#[derive(Clone, Debug)]
pub struct EnergyFn {
    pub alpha: f64,
    /// Uniform-prior transform of the raw distance (flat case only).
    pub transform: Option<EnergyTransform>,
}

impl EnergyFn {
    pub fn raw(alpha: f64) -> Self {
        Self {
            alpha,
            transform: None,
        }
    }

    pub fn distance(&self, model: &dyn Model, x: &OutputPoint) -> Result<f64> {
        rho_power(x, model.data(), self.alpha)
    }

    pub fn energy(&self, model: &dyn Model, x: &OutputPoint) -> Result<f64> {
        let rho = self.distance(model, x)?;
        Ok(match &self.transform {
            Some(t) => t.apply(rho),
            None => rho,
        })
    }
}

/// Prior energy `-ln f_pri(theta)`.
pub fn prior_energy(model: &dyn Model, theta: &ParameterPoint) -> Result<f64> {
    model
        .prior_log_density(theta)
        .map(|lp| -lp)
        .ok_or_else(|| SabcError::MissingPriorDensity(model.name().to_string()))
}

/// Recompute u1 (and u2 when `with_prior`) from stored outputs and parameters.
pub fn recompute_energies(
    ensemble: &mut Ensemble,
    model: &dyn Model,
    energy: &EnergyFn,
    with_prior: bool,
) -> Result<()> {
    for p in &mut ensemble.particles {
        p.u1 = energy.energy(model, &p.output)?;
        p.u2 = if with_prior {
            prior_energy(model, &p.theta)?
        } else {
            0.0
        };
    }
    Ok(())
}
