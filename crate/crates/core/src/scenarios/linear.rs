//! Linear-Gaussian system. Not one of the benchmark scenarios: it exists so
//! the approximate filters can be checked against the exact Kalman recursion.

use serde::{Deserialize, Serialize};

use super::{Result, ScenarioError, StateSpaceModel};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub a: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub init_mean: Vec<f64>,
    pub init_cov: Matrix,
    #[serde(default = "one")]
    pub dt: f64,
}

fn one() -> f64 {
    1.0
}

impl LinearConfig {
    /// Scalar random walk `x' = a·x + w`, `y = h·x + v`.
    pub fn scalar(a: f64, h: f64, q: f64, r: f64, m0: f64, p0: f64) -> Self {
        let s = |v: f64| Matrix::new(1, 1, vec![v]).expect("finite scalar");
        Self {
            a: s(a),
            b: Matrix::zeros(1, 0),
            h: s(h),
            q: s(q),
            r: s(r),
            init_mean: vec![m0],
            init_cov: s(p0),
            dt: 1.0,
        }
    }
}

pub struct LinearModel {
    cfg: LinearConfig,
}

impl LinearModel {
    pub fn new(cfg: LinearConfig) -> Result<Self> {
        let n = cfg.a.rows();
        let p = cfg.h.rows();
        let shapes_ok = cfg.a.is_square()
            && cfg.b.rows() == n
            && cfg.h.cols() == n
            && (cfg.q.rows(), cfg.q.cols()) == (n, n)
            && (cfg.r.rows(), cfg.r.cols()) == (p, p)
            && cfg.init_mean.len() == n
            && (cfg.init_cov.rows(), cfg.init_cov.cols()) == (n, n);
        if !shapes_ok || n == 0 || p == 0 {
            return Err(ScenarioError::InvalidParameter(
                "inconsistent linear system shapes".into(),
            ));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &LinearConfig {
        &self.cfg
    }
}

impl StateSpaceModel for LinearModel {
    fn name(&self) -> &str {
        "linear"
    }
    fn dim_x(&self) -> usize {
        self.cfg.a.rows()
    }
    fn dim_u(&self) -> usize {
        self.cfg.b.cols()
    }
    fn dim_y(&self) -> usize {
        self.cfg.h.rows()
    }
    fn dt(&self) -> f64 {
        self.cfg.dt
    }
    fn process_noise(&self) -> &Matrix {
        &self.cfg.q
    }
    fn observation_noise(&self) -> &Matrix {
        &self.cfg.r
    }
    fn init_mean(&self) -> &[f64] {
        &self.cfg.init_mean
    }
    fn init_cov(&self) -> &Matrix {
        &self.cfg.init_cov
    }

    fn transition(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.cfg.a.mul_vec(x);
        if self.dim_u() > 0 {
            for (o, bu) in out.iter_mut().zip(self.cfg.b.mul_vec(u)) {
                *o += bu;
            }
        }
        Ok(out)
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.cfg.h.mul_vec(x))
    }

    fn transition_jacobian(&self, _x: &[f64], _u: &[f64]) -> Result<Matrix> {
        Ok(self.cfg.a.clone())
    }

    fn observation_jacobian(&self, _x: &[f64]) -> Result<Matrix> {
        Ok(self.cfg.h.clone())
    }
}
