//! Approximate nonlinear filters (EKF, UKF, EnKF, bootstrap PF) plus the
//! exact linear Kalman recursion used to check them.
//!
//! All filters consume a [`StateSpaceModel`]. [`run_filter`] drives one filter
//! over a trajectory and turns numerical breakdown into a recorded divergence
//! instead of an error.

mod ensemble;
mod kalman;
mod particle;
mod unscented;

#[cfg(test)]
pub(crate) mod testing;

pub use ensemble::{enkf_forecast, enkf_step, Ensemble};
pub use kalman::{ekf_predict, ekf_step, ekf_update, kf_step};
pub use particle::{
    effective_sample_size, log_sum_exp, pf_step, systematic_resample, ParticleSet, PfStep,
};
pub use unscented::{sigma_points, ukf_predict, ukf_step, ukf_update, SigmaPoints, UkfParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::rng::{rng_from_seed, SimRng};
use crate::scenarios::{ScenarioError, StateSpaceModel, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("all particle weights collapsed")]
    AllWeightsCollapsed,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// Gaussian posterior approximation `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Self {
        debug_assert_eq!(mean.len(), cov.rows());
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// The model's prior `N(init_mean, init_cov)`.
    pub fn prior(model: &dyn StateSpaceModel) -> Self {
        Self::new(model.init_mean().to_vec(), model.init_cov().clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnkfParams {
    pub ensemble_size: usize,
    /// Multiplicative spread inflation applied to the forecast; 1 disables it.
    pub inflation: f64,
}

impl Default for EnkfParams {
    fn default() -> Self {
        Self {
            ensemble_size: 100,
            inflation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfParams {
    pub particles: usize,
    /// Resample when `ESS < ess_threshold · Np`.
    pub ess_threshold: f64,
}

impl Default for PfParams {
    fn default() -> Self {
        Self {
            particles: 1000,
            ess_threshold: 0.5,
        }
    }
}

/// Which filter to run and how it is tuned. Tagged by `"method"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FilterConfig {
    Ekf,
    Ukf(UkfParams),
    Enkf(EnkfParams),
    Pf(PfParams),
}

impl FilterConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FilterConfig::Ekf => "ekf",
            FilterConfig::Ukf(_) => "ukf",
            FilterConfig::Enkf(_) => "enkf",
            FilterConfig::Pf(_) => "pf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterConfig::Enkf(p) if p.ensemble_size < 2 => Err(FilterError::InvalidArgument(
                "ensemble size must be at least 2".into(),
            )),
            FilterConfig::Enkf(p) if !(p.inflation > 0.0 && p.inflation.is_finite()) => Err(
                FilterError::InvalidArgument("inflation must be positive".into()),
            ),
            FilterConfig::Pf(p) if p.particles < 2 => Err(FilterError::InvalidArgument(
                "particle count must be at least 2".into(),
            )),
            FilterConfig::Pf(p) if !(0.0..=1.0).contains(&p.ess_threshold) => Err(
                FilterError::InvalidArgument("ESS threshold must lie in [0, 1]".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Estimator families selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ekf,
    Ukf,
    Enkf,
    Pf,
    Gru,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ekf,
        Method::Ukf,
        Method::Enkf,
        Method::Pf,
        Method::Gru,
    ];
    pub const CLASSICAL: [Method; 4] = [Method::Ekf, Method::Ukf, Method::Enkf, Method::Pf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ekf => "ekf",
            Method::Ukf => "ukf",
            Method::Enkf => "enkf",
            Method::Pf => "pf",
            Method::Gru => "gru",
        }
    }

    /// Default filter configuration; `None` for the learned estimator.
    pub fn default_filter(self) -> Option<FilterConfig> {
        match self {
            Method::Ekf => Some(FilterConfig::Ekf),
            Method::Ukf => Some(FilterConfig::Ukf(UkfParams::default())),
            Method::Enkf => Some(FilterConfig::Enkf(EnkfParams::default())),
            Method::Pf => Some(FilterConfig::Pf(PfParams::default())),
            Method::Gru => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| FilterError::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone)]
enum Belief {
    Gaussian(GaussianBelief),
    Ensemble(Ensemble),
    Particles(ParticleSet),
}

/// A running filter: owns its belief and its random stream.
pub struct Filter<'m> {
    config: FilterConfig,
    model: &'m dyn StateSpaceModel,
    belief: Belief,
    rng: SimRng,
    estimate: Vec<f64>,
}

impl<'m> Filter<'m> {
    /// Initializes from the model prior; ensembles and particles are drawn
    /// from that prior with a stream seeded by `seed`.
    pub fn new(config: FilterConfig, model: &'m dyn StateSpaceModel, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        let belief = match config {
            FilterConfig::Ekf | FilterConfig::Ukf(_) => {
                Belief::Gaussian(GaussianBelief::prior(model))
            }
            FilterConfig::Enkf(p) => {
                let members = (0..p.ensemble_size)
                    .map(|_| model.sample_initial_state(&mut rng))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Belief::Ensemble(Ensemble::new(members)?)
            }
            FilterConfig::Pf(p) => {
                let particles = (0..p.particles)
                    .map(|_| model.sample_initial_state(&mut rng))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Belief::Particles(ParticleSet::uniform(particles)?)
            }
        };
        Ok(Self {
            config,
            model,
            belief,
            rng,
            estimate: model.init_mean().to_vec(),
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Latest point estimate.
    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    /// Consumes control `u` (driving the previous state forward) and the new
    /// observation `y`; returns the posterior point estimate.
    pub fn step(&mut self, u: &[f64], y: &[f64]) -> Result<&[f64]> {
        let model = self.model;
        self.belief = match (&self.belief, self.config) {
            (Belief::Gaussian(b), FilterConfig::Ekf) => {
                let next = ekf_step(b, model, u, y)?;
                self.estimate = next.mean.clone();
                Belief::Gaussian(next)
            }
            (Belief::Gaussian(b), FilterConfig::Ukf(params)) => {
                let next = ukf_step(b, model, u, y, &params)?;
                self.estimate = next.mean.clone();
                Belief::Gaussian(next)
            }
            (Belief::Ensemble(e), FilterConfig::Enkf(params)) => {
                let next = enkf_step(e, model, u, y, &mut self.rng, params.inflation)?;
                self.estimate = next.mean();
                Belief::Ensemble(next)
            }
            (Belief::Particles(p), FilterConfig::Pf(params)) => {
                let out = pf_step(p, model, u, y, &mut self.rng, params.ess_threshold)?;
                self.estimate = out.estimate;
                Belief::Particles(out.set)
            }
            _ => unreachable!("belief representation always matches the configured filter"),
        };
        Ok(&self.estimate)
    }
}

/// Output of one filtering run over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    /// One estimate per observation; entries from the divergence step on are NaN.
    pub estimates: Vec<Vec<f64>>,
    /// First step whose estimate was non-finite or whose update broke down.
    pub diverged_at: Option<usize>,
    pub failure: Option<String>,
}

impl FilterRun {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Runs a filter causally over `traj`: estimate `t` uses observations
/// `0..=t` and controls `0..=t` only, and targets `traj.states[t + 1]`.
///
/// Invalid arguments are errors. Numerical breakdown mid-run (non-finite
/// estimate, singular innovation, collapsed weights, degenerate geometry)
/// freezes the run and is reported through `diverged_at`.
pub fn run_filter(
    config: &FilterConfig,
    model: &dyn StateSpaceModel,
    traj: &Trajectory,
    seed: u64,
) -> Result<FilterRun> {
    traj.validate(model.dim_x(), model.dim_u(), model.dim_y())?;
    let mut filter = Filter::new(*config, model, seed)?;
    let horizon = traj.horizon();
    let mut estimates = Vec::with_capacity(horizon);
    let mut diverged_at = None;
    let mut failure = None;
    for (t, (u, y)) in traj.controls.iter().zip(&traj.observations).enumerate() {
        match filter.step(u, y) {
            Ok(est) if est.iter().all(|v| v.is_finite()) => estimates.push(est.to_vec()),
            Ok(_) => {
                diverged_at = Some(t);
                failure = Some("non-finite estimate".to_string());
                break;
            }
            Err(e @ FilterError::InvalidArgument(_)) => return Err(e),
            Err(e) => {
                diverged_at = Some(t);
                failure = Some(e.to_string());
                break;
            }
        }
    }
    estimates.resize(horizon, vec![f64::NAN; model.dim_x()]);
    Ok(FilterRun {
        estimates,
        diverged_at,
        failure,
    })
}
