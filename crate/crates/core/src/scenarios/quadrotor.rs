//! Planar quadrotor in discrete time, observed through a fixed random linear
//! map `C ∈ R^{3×6}` with entries drawn once from `Uniform[0, 1]`.
//!
//! State `(x, z, φ, ẋ, ż, φ̇)`, control `(u0, u1)` rotor thrusts.

use serde::{Deserialize, Serialize};

use super::{check_non_negative, check_positive, diag_sq, Result, ScenarioError, StateSpaceModel};
use crate::linalg::Matrix;
use crate::rng::{rng_from_seed, uniform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub arm: f64,
    pub inertia: f64,
    pub gravity: f64,
    pub tau: f64,
}

/// One step of the discrete planar-quadrotor map (noise-free).
///
/// The last row sets the angular rate from the thrust difference alone:
/// `φ̇' = (u0 − u1)·l·τ/J`.
pub fn quadrotor_step(s: &[f64], u: &[f64], p: &QuadrotorParams) -> Vec<f64> {
    let (x, z, phi, xd, zd, phid) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let (sin, cos) = phi.sin_cos();
    let t = p.tau;
    vec![
        x + (xd * cos - zd * sin) * t,
        z + (xd * sin + zd * cos) * t,
        phi + phid * t,
        xd + (zd * phid - p.gravity * sin) * t,
        zd + (-xd * phid - p.gravity * cos + (u[0] + u[1]) / p.mass) * t,
        (u[0] - u[1]) * p.arm * t / p.inertia,
    ]
}

/// `C·state`.
pub fn quadrotor_observe(state: &[f64], c: &Matrix) -> Vec<f64> {
    c.mul_vec(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorConfig {
    pub mass: f64,
    pub arm: f64,
    pub inertia: f64,
    pub gravity: f64,
    pub tau: f64,
    /// Constant thrusts applied every step; zero means free fall.
    pub controls: [f64; 2],
    pub init_mean: [f64; 6],
    pub init_std: [f64; 6],
    pub process_std: f64,
    pub obs_std: f64,
    /// Seed for drawing `C` when `observation_matrix` is absent.
    pub observation_seed: u64,
    /// Row-major `C`; filled in by [`QuadrotorConfig::materialize`].
    pub observation_matrix: Option<Vec<f64>>,
}

impl Default for QuadrotorConfig {
    fn default() -> Self {
        Self {
            mass: 0.8,
            arm: 0.25,
            inertia: 0.05,
            gravity: 9.81,
            tau: 0.05,
            controls: [0.0, 0.0],
            init_mean: [0.0; 6],
            init_std: [0.1; 6],
            process_std: 0.01,
            obs_std: 0.1,
            observation_seed: 0,
            observation_matrix: None,
        }
    }
}

impl QuadrotorConfig {
    pub fn params(&self) -> QuadrotorParams {
        QuadrotorParams {
            mass: self.mass,
            arm: self.arm,
            inertia: self.inertia,
            gravity: self.gravity,
            tau: self.tau,
        }
    }

    /// Draws `C` from `observation_seed` (18 uniforms, row-major).
    pub fn sample_observation_matrix(seed: u64) -> Matrix {
        let mut rng = rng_from_seed(seed);
        let data = (0..18).map(|_| uniform(&mut rng)).collect();
        Matrix::new(3, 6, data).expect("uniform draws are finite")
    }

    /// Returns a copy with `C` drawn and stored, so it travels with datasets.
    pub fn materialize(&self) -> Self {
        let mut out = self.clone();
        if out.observation_matrix.is_none() {
            let c = Self::sample_observation_matrix(self.observation_seed);
            out.observation_matrix = Some(c.as_slice().to_vec());
        }
        out
    }
}

pub struct QuadrotorModel {
    cfg: QuadrotorConfig,
    params: QuadrotorParams,
    c: Matrix,
    q: Matrix,
    r: Matrix,
    init_cov: Matrix,
}

impl QuadrotorModel {
    pub fn new(cfg: QuadrotorConfig) -> Result<Self> {
        let cfg = cfg.materialize();
        for (name, v) in [
            ("mass", cfg.mass),
            ("arm", cfg.arm),
            ("inertia", cfg.inertia),
            ("tau", cfg.tau),
        ] {
            check_positive(name, v)?;
        }
        check_non_negative("process_std", cfg.process_std)?;
        check_non_negative("obs_std", cfg.obs_std)?;
        let data = cfg.observation_matrix.clone().unwrap_or_default();
        let c = Matrix::new(3, 6, data)
            .map_err(|e| ScenarioError::InvalidParameter(format!("observation matrix: {e}")))?;
        Ok(Self {
            params: cfg.params(),
            c,
            q: Matrix::identity(6).scale(cfg.process_std.powi(2)),
            r: Matrix::identity(3).scale(cfg.obs_std.powi(2)),
            init_cov: diag_sq(&cfg.init_std),
            cfg,
        })
    }

    pub fn observation_matrix(&self) -> &Matrix {
        &self.c
    }
}

impl StateSpaceModel for QuadrotorModel {
    fn name(&self) -> &str {
        "quadrotor"
    }
    fn dim_x(&self) -> usize {
        6
    }
    fn dim_u(&self) -> usize {
        2
    }
    fn dim_y(&self) -> usize {
        3
    }
    fn dt(&self) -> f64 {
        self.cfg.tau
    }
    fn process_noise(&self) -> &Matrix {
        &self.q
    }
    fn observation_noise(&self) -> &Matrix {
        &self.r
    }
    fn init_mean(&self) -> &[f64] {
        &self.cfg.init_mean
    }
    fn init_cov(&self) -> &Matrix {
        &self.init_cov
    }

    fn transition(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(quadrotor_step(x, u, &self.params))
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(quadrotor_observe(x, &self.c))
    }

    fn transition_jacobian(&self, s: &[f64], _u: &[f64]) -> Result<Matrix> {
        let (phi, xd, zd, phid) = (s[2], s[3], s[4], s[5]);
        let (sin, cos) = phi.sin_cos();
        let t = self.params.tau;
        let g = self.params.gravity;
        let mut j = Matrix::zeros(6, 6);
        j[(0, 0)] = 1.0;
        j[(0, 2)] = (-xd * sin - zd * cos) * t;
        j[(0, 3)] = cos * t;
        j[(0, 4)] = -sin * t;
        j[(1, 1)] = 1.0;
        j[(1, 2)] = (xd * cos - zd * sin) * t;
        j[(1, 3)] = sin * t;
        j[(1, 4)] = cos * t;
        j[(2, 2)] = 1.0;
        j[(2, 5)] = t;
        j[(3, 2)] = -g * cos * t;
        j[(3, 3)] = 1.0;
        j[(3, 4)] = phid * t;
        j[(3, 5)] = zd * t;
        j[(4, 2)] = g * sin * t;
        j[(4, 3)] = -phid * t;
        j[(4, 4)] = 1.0;
        j[(4, 5)] = -xd * t;
        Ok(j)
    }

    fn observation_jacobian(&self, _x: &[f64]) -> Result<Matrix> {
        Ok(self.c.clone())
    }

    fn control(&self, _t: usize) -> Vec<f64> {
        self.cfg.controls.to_vec()
    }
}
