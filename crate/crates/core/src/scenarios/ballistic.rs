//! Ballistic re-entry: a body falling through an exponential atmosphere with
//! quadratic drag, observed by range from a ground sensor.
//!
//! State `(a, v, c)`: altitude, downward velocity, ballistic coefficient.

use serde::{Deserialize, Serialize};

use super::{check_non_negative, check_positive, diag_sq, rk4_integrate, Result, StateSpaceModel};
use crate::linalg::Matrix;
use crate::rng::{GaussianSampler, SimRng};

/// `(ȧ, v̇, ċ) = (−v, g − c·v²·E(a), 0)` with `E(a) = min(exp(−k·a), 1)`.
pub fn ballistic_drift(state: &[f64], gravity: f64, density_decay: f64) -> Vec<f64> {
    let (a, v, c) = (state[0], state[1], state[2]);
    let density = (-density_decay * a).exp().min(1.0);
    vec![-v, gravity - c * v * v * density, 0.0]
}

/// Range from a sensor at horizontal offset `r0` and altitude `a_ref`.
pub fn ballistic_observe(state: &[f64], sensor_offset: f64, reference_altitude: f64) -> f64 {
    let da = state[0] - reference_altitude;
    (sensor_offset * sensor_offset + da * da).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallisticConfig {
    pub gravity: f64,
    pub density_decay: f64,
    pub sensor_offset: f64,
    pub reference_altitude: f64,
    pub dt: f64,
    pub substeps: usize,
    pub init_mean: [f64; 3],
    pub init_std: [f64; 3],
    pub process_std: [f64; 3],
    pub range_std: f64,
}

impl Default for BallisticConfig {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            density_decay: 0.1,
            sensor_offset: 100.0,
            reference_altitude: 0.0,
            dt: 0.1,
            substeps: 10,
            init_mean: [1000.0, 0.0, 0.01],
            init_std: [10.0, 1.0, 0.005],
            process_std: [0.0, 0.01, 1e-6],
            range_std: 1.0,
        }
    }
}

pub struct BallisticModel {
    cfg: BallisticConfig,
    q: Matrix,
    r: Matrix,
    init_cov: Matrix,
}

impl BallisticModel {
    pub fn new(cfg: BallisticConfig) -> Result<Self> {
        check_positive("gravity", cfg.gravity)?;
        check_positive("density_decay", cfg.density_decay)?;
        check_positive("sensor_offset", cfg.sensor_offset)?;
        check_positive("dt", cfg.dt)?;
        if cfg.substeps == 0 {
            return Err(super::ScenarioError::InvalidParameter(
                "substeps must be >= 1".into(),
            ));
        }
        check_non_negative("range_std", cfg.range_std)?;
        Ok(Self {
            q: diag_sq(&cfg.process_std),
            r: diag_sq(&[cfg.range_std]),
            init_cov: diag_sq(&cfg.init_std),
            cfg,
        })
    }

    pub fn config(&self) -> &BallisticConfig {
        &self.cfg
    }
}

impl StateSpaceModel for BallisticModel {
    fn name(&self) -> &str {
        "ballistic"
    }
    fn dim_x(&self) -> usize {
        3
    }
    fn dim_u(&self) -> usize {
        0
    }
    fn dim_y(&self) -> usize {
        1
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
        &self.cfg.init_mean
    }
    fn init_cov(&self) -> &Matrix {
        &self.init_cov
    }

    fn transition(&self, x: &[f64], _u: &[f64]) -> Result<Vec<f64>> {
        let (g, k) = (self.cfg.gravity, self.cfg.density_decay);
        Ok(rk4_integrate(
            |s| ballistic_drift(s, g, k),
            x,
            self.cfg.dt,
            self.cfg.substeps,
        ))
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![ballistic_observe(
            x,
            self.cfg.sensor_offset,
            self.cfg.reference_altitude,
        )])
    }

    fn observation_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        let range = ballistic_observe(x, self.cfg.sensor_offset, self.cfg.reference_altitude);
        let da = x[0] - self.cfg.reference_altitude;
        Ok(Matrix::new(1, 3, vec![da / range, 0.0, 0.0])?)
    }

    // The ballistic coefficient is a magnitude: c ~ |N(mean, std²)|.
    fn sample_initial_state(&self, rng: &mut SimRng) -> Result<Vec<f64>> {
        let sampler = GaussianSampler::new(&self.init_cov)?;
        let mut x = self.cfg.init_mean.to_vec();
        sampler.perturb(&mut x, rng);
        x[2] = x[2].abs();
        Ok(x)
    }
}
