//! Small systems shared by the filter tests.

use crate::linalg::Matrix;
use crate::rng::{standard_normal, SimRng};
use crate::scenarios::{LinearConfig, LinearModel, Result, StateSpaceModel};

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// `G Gᵀ / n + 0.1 I`, comfortably positive definite.
pub fn random_spd(rng: &mut SimRng, n: usize) -> Matrix {
    let g = random_matrix(rng, n, n);
    g.matmul_t(&g)
        .scale(1.0 / n as f64)
        .add(&Matrix::identity(n).scale(0.1))
}

/// Stable random linear-Gaussian system with `n` states, `p` outputs, `m` inputs.
pub fn random_linear_system(rng: &mut SimRng, n: usize, p: usize, m: usize) -> LinearConfig {
    let a = Matrix::identity(n)
        .scale(0.7)
        .add(&random_matrix(rng, n, n).scale(0.1));
    LinearConfig {
        a,
        b: random_matrix(rng, n, m),
        h: random_matrix(rng, p, n),
        q: random_spd(rng, n),
        r: random_spd(rng, p),
        init_mean: (0..n).map(|_| standard_normal(rng)).collect(),
        init_cov: random_spd(rng, n),
        dt: 1.0,
    }
}

pub fn scalar_model(a: f64, h: f64, q: f64, r: f64) -> LinearModel {
    LinearModel::new(LinearConfig::scalar(a, h, q, r, 0.0, 1.0)).unwrap()
}

/// `x' = x²`, `y = x`, noise-free dynamics and unit observation noise.
pub struct QuadraticModel {
    q: Matrix,
    r: Matrix,
    mean: Vec<f64>,
}

impl Default for QuadraticModel {
    fn default() -> Self {
        Self {
            q: Matrix::zeros(1, 1),
            r: Matrix::identity(1),
            mean: vec![0.0],
        }
    }
}

impl StateSpaceModel for QuadraticModel {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_u(&self) -> usize {
        0
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn dt(&self) -> f64 {
        1.0
    }
    fn process_noise(&self) -> &Matrix {
        &self.q
    }
    fn observation_noise(&self) -> &Matrix {
        &self.r
    }
    fn init_mean(&self) -> &[f64] {
        &self.mean
    }
    fn init_cov(&self) -> &Matrix {
        &self.r
    }
    fn transition(&self, x: &[f64], _u: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![x[0] * x[0]])
    }
    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}
