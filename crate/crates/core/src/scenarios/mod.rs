//! Nonlinear benchmark systems behind one state-space interface.
//!
//! Every scenario is a discrete-time model
//! `x_{t+1} = f(x_t, u_t) + w_t`, `y = h(x) + v` with Gaussian `w ~ N(0, Q)`
//! and `v ~ N(0, R)`. Continuous-time systems are integrated with fixed-step
//! RK4 inside `f`.
//!
//! Indexing convention: a [`Trajectory`] of horizon `T` holds `T + 1` states
//! and `T` observations/controls. `controls[t]` drives `states[t]` to
//! `states[t + 1]`, and `observations[t]` measures `states[t + 1]`.

mod ballistic;
mod bot;
mod config;
mod integrate;
mod linear;
mod lorenz96;
mod pendulum;
mod quadrotor;

pub use ballistic::{ballistic_drift, ballistic_observe, BallisticConfig, BallisticModel};
pub use bot::{bot_observe, bot_step, wrap_angle, BotConfig, BotModel};
pub use config::{ScenarioConfig, ScenarioKind};
pub use integrate::{finite_difference_jacobian, rk4_integrate, rk4_step};
pub use linear::{LinearConfig, LinearModel};
pub use lorenz96::{lorenz96_drift, Lorenz96Config, Lorenz96Model};
pub use pendulum::{
    pendulum_accel, pendulum_energy, PendulumConfig, PendulumModel, PendulumParams,
};
pub use quadrotor::{
    quadrotor_observe, quadrotor_step, QuadrotorConfig, QuadrotorModel, QuadrotorParams,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::rng::{rng_from_seed, GaussianSampler, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("degenerate geometry: target at the sensor origin")]
    DegenerateGeometry,
    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),
    #[error("pendulum mass matrix is singular")]
    SingularMassMatrix,
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

/// Uniform interface implemented by every scenario.
pub trait StateSpaceModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_y(&self) -> usize;
    /// Sampling period between consecutive observations, in seconds.
    fn dt(&self) -> f64;
    fn process_noise(&self) -> &Matrix;
    fn observation_noise(&self) -> &Matrix;
    fn init_mean(&self) -> &[f64];
    fn init_cov(&self) -> &Matrix;

    /// Noise-free transition `f(x, u)`.
    fn transition(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>>;

    /// Noise-free observation `h(x)`.
    fn observe(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `∂f/∂x`. Defaults to central finite differences.
    fn transition_jacobian(&self, x: &[f64], u: &[f64]) -> Result<Matrix> {
        finite_difference_jacobian(|z| self.transition(z, u), x)
    }

    /// `∂h/∂x`. Defaults to central finite differences.
    fn observation_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        finite_difference_jacobian(|z| self.observe(z), x)
    }

    /// `y - y_ref`, with angular components wrapped where the model has them.
    fn observation_residual(&self, y: &[f64], y_ref: &[f64]) -> Vec<f64> {
        y.iter().zip(y_ref).map(|(a, b)| a - b).collect()
    }

    /// Maps a noisy observation back onto its domain (bearings into (-π, π]).
    fn wrap_observation(&self, _y: &mut [f64]) {}

    /// Control applied at step `t`.
    fn control(&self, _t: usize) -> Vec<f64> {
        vec![0.0; self.dim_u()]
    }

    /// Draws `x_0`. Defaults to `N(init_mean, init_cov)`.
    fn sample_initial_state(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        let sampler = GaussianSampler::new(self.init_cov())?;
        let mut x = self.init_mean().to_vec();
        sampler.perturb(&mut x, rng);
        Ok(x)
    }
}

/// One rollout of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: String,
    pub seed: u64,
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.observations.len()
    }

    /// States the estimators are scored against: `states[1..=T]`.
    pub fn targets(&self) -> &[Vec<f64>] {
        &self.states[1..]
    }

    /// Checks lengths and per-vector dimensions.
    pub fn validate(&self, dim_x: usize, dim_u: usize, dim_y: usize) -> Result<()> {
        let t = self.observations.len();
        if self.states.len() != t + 1 || self.controls.len() != t {
            return Err(ScenarioError::InvalidArgument(format!(
                "trajectory lengths: {} states, {} observations, {} controls",
                self.states.len(),
                t,
                self.controls.len()
            )));
        }
        let bad = |v: &[Vec<f64>], d: usize| v.iter().any(|x| x.len() != d);
        if bad(&self.states, dim_x) || bad(&self.observations, dim_y) || bad(&self.controls, dim_u)
        {
            return Err(ScenarioError::InvalidArgument(
                "trajectory vector dimension does not match the scenario".into(),
            ));
        }
        Ok(())
    }

    /// Contiguous window of `len` transitions starting at step `start`.
    pub fn window(&self, start: usize, len: usize) -> Trajectory {
        Trajectory {
            scenario: self.scenario.clone(),
            seed: self.seed,
            states: self.states[start..=start + len].to_vec(),
            observations: self.observations[start..start + len].to_vec(),
            controls: self.controls[start..start + len].to_vec(),
        }
    }

    /// First `len` transitions.
    pub fn truncated(&self, len: usize) -> Trajectory {
        self.window(0, len)
    }
}

/// Rolls out `horizon` transitions of `model` from a fresh stream seeded by `seed`.
///
/// Draw order is fixed: `x_0`, then per step process noise followed by
/// observation noise. Rescaling `R` therefore leaves the state path unchanged.
pub fn simulate_trajectory(
    model: &dyn StateSpaceModel,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(ScenarioError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let process = GaussianSampler::new(model.process_noise())?;
    let observation = GaussianSampler::new(model.observation_noise())?;

    let mut x = model.sample_initial_state(&mut rng)?;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut observations = Vec::with_capacity(horizon);
    let mut controls = Vec::with_capacity(horizon);
    states.push(x.clone());
    for t in 0..horizon {
        let u = model.control(t);
        x = model.transition(&x, &u)?;
        process.perturb(&mut x, &mut rng);
        let mut y = model.observe(&x)?;
        observation.perturb(&mut y, &mut rng);
        model.wrap_observation(&mut y);
        states.push(x.clone());
        observations.push(y);
        controls.push(u);
    }
    Ok(Trajectory {
        scenario: model.name().to_string(),
        seed,
        states,
        observations,
        controls,
    })
}

/// A model whose noise covariances are replaced, e.g. to give a filter a
/// deliberately mismatched noise model.
pub struct NoiseOverride<'a> {
    inner: &'a dyn StateSpaceModel,
    q: Matrix,
    r: Matrix,
}

impl<'a> NoiseOverride<'a> {
    pub fn new(inner: &'a dyn StateSpaceModel, q: Matrix, r: Matrix) -> Self {
        Self { inner, q, r }
    }

    /// Multiplies both `Q` and `R` by `factor`.
    pub fn scaled(inner: &'a dyn StateSpaceModel, factor: f64) -> Self {
        Self::new(
            inner,
            inner.process_noise().scale(factor),
            inner.observation_noise().scale(factor),
        )
    }
}

impl StateSpaceModel for NoiseOverride<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_u(&self) -> usize {
        self.inner.dim_u()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn dt(&self) -> f64 {
        self.inner.dt()
    }
    fn process_noise(&self) -> &Matrix {
        &self.q
    }
    fn observation_noise(&self) -> &Matrix {
        &self.r
    }
    fn init_mean(&self) -> &[f64] {
        self.inner.init_mean()
    }
    fn init_cov(&self) -> &Matrix {
        self.inner.init_cov()
    }
    fn transition(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.inner.transition(x, u)
    }
    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.observe(x)
    }
    fn transition_jacobian(&self, x: &[f64], u: &[f64]) -> Result<Matrix> {
        self.inner.transition_jacobian(x, u)
    }
    fn observation_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.inner.observation_jacobian(x)
    }
    fn observation_residual(&self, y: &[f64], y_ref: &[f64]) -> Vec<f64> {
        self.inner.observation_residual(y, y_ref)
    }
    fn wrap_observation(&self, y: &mut [f64]) {
        self.inner.wrap_observation(y)
    }
    fn control(&self, t: usize) -> Vec<f64> {
        self.inner.control(t)
    }
    fn sample_initial_state(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        self.inner.sample_initial_state(rng)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::InvalidParameter(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

fn diag_sq(stds: &[f64]) -> Matrix {
    Matrix::from_diag(&stds.iter().map(|s| s * s).collect::<Vec<_>>())
}
