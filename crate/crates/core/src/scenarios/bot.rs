//! Single-sensor bearings-only tracking of a constant-velocity target.
//!
//! State `(p_x, p_y, v_x, v_y)`; the sensor sits at the origin and reports
//! the bearing to the target in `(-π, π]`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{check_non_negative, check_positive, diag_sq, Result, ScenarioError, StateSpaceModel};
use crate::linalg::Matrix;

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Constant-velocity step over a period `period`.
pub fn bot_step(state: &[f64], period: f64) -> Vec<f64> {
    vec![
        state[0] + period * state[2],
        state[1] + period * state[3],
        state[2],
        state[3],
    ]
}

/// Bearing from the origin to the target.
pub fn bot_observe(state: &[f64]) -> Result<f64> {
    let (px, py) = (state[0], state[1]);
    if px == 0.0 && py == 0.0 {
        return Err(ScenarioError::DegenerateGeometry);
    }
    Ok(wrap_angle(py.atan2(px)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotConfig {
    pub period: f64,
    /// Spectral density of the white-acceleration process noise.
    pub accel_intensity: f64,
    pub bearing_std: f64,
    pub init_mean: [f64; 4],
    pub init_std: [f64; 4],
}

impl Default for BotConfig {
    fn default() -> Self {
        Self {
            period: 1.0,
            accel_intensity: 0.01,
            bearing_std: 0.02,
            init_mean: [200.0, 1000.0, -4.0, 0.0],
            init_std: [50.0, 50.0, 1.0, 1.0],
        }
    }
}

pub struct BotModel {
    cfg: BotConfig,
    f: Matrix,
    q: Matrix,
    r: Matrix,
    init_cov: Matrix,
}

impl BotModel {
    pub fn new(cfg: BotConfig) -> Result<Self> {
        check_positive("period", cfg.period)?;
        check_non_negative("accel_intensity", cfg.accel_intensity)?;
        check_non_negative("bearing_std", cfg.bearing_std)?;
        let t = cfg.period;
        let mut f = Matrix::identity(4);
        f[(0, 2)] = t;
        f[(1, 3)] = t;
        let qi = cfg.accel_intensity;
        let mut q = Matrix::zeros(4, 4);
        for (p, v) in [(0, 2), (1, 3)] {
            q[(p, p)] = qi * t.powi(3) / 3.0;
            q[(p, v)] = qi * t * t / 2.0;
            q[(v, p)] = qi * t * t / 2.0;
            q[(v, v)] = qi * t;
        }
        Ok(Self {
            f,
            q,
            r: diag_sq(&[cfg.bearing_std]),
            init_cov: diag_sq(&cfg.init_std),
            cfg,
        })
    }
}

impl StateSpaceModel for BotModel {
    fn name(&self) -> &str {
        "bot"
    }
    fn dim_x(&self) -> usize {
        4
    }
    fn dim_u(&self) -> usize {
        0
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn dt(&self) -> f64 {
        self.cfg.period
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
        Ok(bot_step(x, self.cfg.period))
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![bot_observe(x)?])
    }

    fn transition_jacobian(&self, _x: &[f64], _u: &[f64]) -> Result<Matrix> {
        Ok(self.f.clone())
    }

    fn observation_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        let (px, py) = (x[0], x[1]);
        let r2 = px * px + py * py;
        if r2 == 0.0 {
            return Err(ScenarioError::DegenerateGeometry);
        }
        Ok(Matrix::new(1, 4, vec![-py / r2, px / r2, 0.0, 0.0])?)
    }

    fn observation_residual(&self, y: &[f64], y_ref: &[f64]) -> Vec<f64> {
        vec![wrap_angle(y[0] - y_ref[0])]
    }

    fn wrap_observation(&self, y: &mut [f64]) {
        y[0] = wrap_angle(y[0]);
    }
}
