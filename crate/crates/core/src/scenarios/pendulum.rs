//! Planar N-link pendulum with point masses at the link ends.
//!
//! Angles are measured from the downward vertical. With
//! `μ_j = Σ_{i≥j} m_i` the Euler–Lagrange equations of the chain read
//!
//! ```text
//! Σ_k μ_max(j,k) R_j R_k cos(θ_j−θ_k) ω̇_k
//!     = −Σ_k μ_max(j,k) R_j R_k sin(θ_j−θ_k) ω_k² − μ_j g R_j sin θ_j
//! ```
//!
//! State is `(θ_1..θ_N, ω_1..ω_N)`; only the angles are observed.

use serde::{Deserialize, Serialize};

use super::{
    check_non_negative, check_positive, rk4_integrate, Result, ScenarioError, StateSpaceModel,
};
use crate::linalg::{solve, LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub lengths: Vec<f64>,
    pub masses: Vec<f64>,
    pub gravity: f64,
}

impl PendulumParams {
    pub fn uniform(links: usize, length: f64, mass: f64, gravity: f64) -> Self {
        Self {
            lengths: vec![length; links],
            masses: vec![mass; links],
            gravity,
        }
    }

    pub fn links(&self) -> usize {
        self.lengths.len()
    }

    fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.len() != self.masses.len() {
            return Err(ScenarioError::InvalidParameter(
                "pendulum needs matching, non-empty lengths and masses".into(),
            ));
        }
        for (&r, &m) in self.lengths.iter().zip(&self.masses) {
            check_positive("link length", r)?;
            check_positive("link mass", m)?;
        }
        check_non_negative("gravity", self.gravity)
    }

    /// `μ_j`: total mass hanging at or below joint `j`.
    fn tail_masses(&self) -> Vec<f64> {
        let mut mu = self.masses.clone();
        for j in (0..mu.len().saturating_sub(1)).rev() {
            mu[j] += mu[j + 1];
        }
        mu
    }
}

/// Angular accelerations `ω̇` solving `M(θ)·ω̇ = b(θ, ω)`.
pub fn pendulum_accel(theta: &[f64], omega: &[f64], params: &PendulumParams) -> Result<Vec<f64>> {
    let n = params.links();
    if theta.len() != n || omega.len() != n {
        return Err(ScenarioError::InvalidArgument(format!(
            "pendulum with {n} links got {} angles and {} rates",
            theta.len(),
            omega.len()
        )));
    }
    let mu = params.tail_masses();
    let r = &params.lengths;
    let mut mass = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        for k in 0..n {
            let coupling = mu[j.max(k)] * r[j] * r[k];
            let d = theta[j] - theta[k];
            mass[(j, k)] = coupling * d.cos();
            rhs[j] -= coupling * d.sin() * omega[k] * omega[k];
        }
        rhs[j] -= mu[j] * params.gravity * r[j] * theta[j].sin();
    }
    solve(&mass, &rhs).map_err(|e| match e {
        LinalgError::Singular => ScenarioError::SingularMassMatrix,
        other => other.into(),
    })
}

/// Kinetic plus potential energy of the chain, summed mass by mass.
pub fn pendulum_energy(theta: &[f64], omega: &[f64], params: &PendulumParams) -> f64 {
    let (r, g) = (&params.lengths, params.gravity);
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for (i, &m) in params.masses.iter().enumerate() {
        let mut vv = 0.0;
        for j in 0..=i {
            for k in 0..=i {
                vv += r[j] * r[k] * omega[j] * omega[k] * (theta[j] - theta[k]).cos();
            }
        }
        kinetic += 0.5 * m * vv;
        potential -= m * g * (0..=i).map(|j| r[j] * theta[j].cos()).sum::<f64>();
    }
    kinetic + potential
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PendulumConfig {
    pub links: usize,
    pub length: f64,
    pub mass: f64,
    pub gravity: f64,
    pub dt: f64,
    pub substeps: usize,
    pub init_angle: f64,
    pub init_angle_std: f64,
    pub init_rate_std: f64,
    /// Process noise std on the angular rates (angles are noise-free).
    pub rate_noise_std: f64,
    pub obs_std: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            links: 2,
            length: 1.0,
            mass: 1.0,
            gravity: 9.81,
            dt: 0.02,
            substeps: 4,
            init_angle: std::f64::consts::FRAC_PI_4,
            init_angle_std: 0.1,
            init_rate_std: 0.1,
            rate_noise_std: 0.01,
            obs_std: 0.05,
        }
    }
}

pub struct PendulumModel {
    cfg: PendulumConfig,
    params: PendulumParams,
    q: Matrix,
    r: Matrix,
    init_mean: Vec<f64>,
    init_cov: Matrix,
}

impl PendulumModel {
    pub fn new(cfg: PendulumConfig) -> Result<Self> {
        let params = PendulumParams::uniform(cfg.links, cfg.length, cfg.mass, cfg.gravity);
        params.validate()?;
        check_positive("dt", cfg.dt)?;
        if cfg.substeps == 0 {
            return Err(ScenarioError::InvalidParameter(
                "substeps must be >= 1".into(),
            ));
        }
        check_non_negative("rate_noise_std", cfg.rate_noise_std)?;
        check_non_negative("obs_std", cfg.obs_std)?;
        let n = cfg.links;
        let mut q = Matrix::zeros(2 * n, 2 * n);
        let mut init_cov = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            q[(n + i, n + i)] = cfg.rate_noise_std.powi(2);
            init_cov[(i, i)] = cfg.init_angle_std.powi(2);
            init_cov[(n + i, n + i)] = cfg.init_rate_std.powi(2);
        }
        let mut init_mean = vec![0.0; 2 * n];
        init_mean[..n].fill(cfg.init_angle);
        Ok(Self {
            params,
            q,
            r: Matrix::identity(n).scale(cfg.obs_std.powi(2)),
            init_mean,
            init_cov,
            cfg,
        })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    fn drift(&self, s: &[f64]) -> Result<Vec<f64>> {
        let n = self.cfg.links;
        let accel = pendulum_accel(&s[..n], &s[n..], &self.params)?;
        Ok(s[n..].iter().copied().chain(accel).collect())
    }
}

impl StateSpaceModel for PendulumModel {
    fn name(&self) -> &str {
        "pendulum"
    }
    fn dim_x(&self) -> usize {
        2 * self.cfg.links
    }
    fn dim_u(&self) -> usize {
        0
    }
    fn dim_y(&self) -> usize {
        self.cfg.links
    }
    fn dt(&self) -> f64 {
        self.cfg.dt
    }
    fn process_noise(&self) -> &Matrix {
        &self.q
    }
    fn observation_noise(&self) -> &Matrix {
        &self.r
    }
    fn init_mean(&self) -> &[f64] {
        &self.init_mean
    }
    fn init_cov(&self) -> &Matrix {
        &self.init_cov
    }

    fn transition(&self, x: &[f64], _u: &[f64]) -> Result<Vec<f64>> {
        // The mass matrix is positive definite for positive parameters; a
        // failure inside RK4 is surfaced after the step.
        let failure = std::cell::Cell::new(None);
        let out = rk4_integrate(
            |s| match self.drift(s) {
                Ok(d) => d,
                Err(e) => {
                    failure.set(Some(e));
                    vec![f64::NAN; s.len()]
                }
            },
            x,
            self.cfg.dt,
            self.cfg.substeps,
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x[..self.cfg.links].to_vec())
    }

    fn observation_jacobian(&self, _x: &[f64]) -> Result<Matrix> {
        let n = self.cfg.links;
        let mut h = Matrix::zeros(n, 2 * n);
        for i in 0..n {
            h[(i, i)] = 1.0;
        }
        Ok(h)
    }
}
