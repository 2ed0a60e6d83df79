//! Lorenz-96: `J` cyclically coupled variables under constant forcing,
//! fully observed with additive noise.

use serde::{Deserialize, Serialize};

use super::{
    check_non_negative, check_positive, rk4_integrate, Result, ScenarioError, StateSpaceModel,
};
use crate::linalg::Matrix;

/// `dX_j = (X_{j+1} − X_{j−2})·X_{j−1} − X_j + F` with cyclic indices.
pub fn lorenz96_drift(x: &[f64], forcing: f64) -> Result<Vec<f64>> {
    let j = x.len();
    if j < 4 {
        return Err(ScenarioError::DimensionTooSmall(format!(
            "Lorenz-96 needs at least 4 variables, got {j}"
        )));
    }
    Ok((0..j)
        .map(|i| {
            let next = x[(i + 1) % j];
            let prev = x[(i + j - 1) % j];
            let prev2 = x[(i + j - 2) % j];
            (next - prev2) * prev - x[i] + forcing
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Lorenz96Config {
    pub dim: usize,
    pub forcing: f64,
    /// Time between observations.
    pub obs_interval: f64,
    /// RK4 step inside one observation interval.
    pub integration_step: f64,
    pub process_std: f64,
    pub obs_std: f64,
    /// Initial states are `forcing·1` plus Gaussian noise of this std.
    pub init_std: f64,
}

impl Default for Lorenz96Config {
    fn default() -> Self {
        Self {
            dim: 8,
            forcing: 8.0,
            obs_interval: 0.05,
            integration_step: 0.01,
            process_std: 0.01,
            obs_std: 0.1,
            init_std: 1.0,
        }
    }
}

pub struct Lorenz96Model {
    cfg: Lorenz96Config,
    substeps: usize,
    q: Matrix,
    r: Matrix,
    init_mean: Vec<f64>,
    init_cov: Matrix,
}

impl Lorenz96Model {
    pub fn new(cfg: Lorenz96Config) -> Result<Self> {
        if cfg.dim < 4 {
            return Err(ScenarioError::DimensionTooSmall(format!(
                "Lorenz-96 needs at least 4 variables, got {}",
                cfg.dim
            )));
        }
        check_positive("obs_interval", cfg.obs_interval)?;
        check_positive("integration_step", cfg.integration_step)?;
        check_non_negative("process_std", cfg.process_std)?;
        check_non_negative("obs_std", cfg.obs_std)?;
        check_non_negative("init_std", cfg.init_std)?;
        let substeps = (cfg.obs_interval / cfg.integration_step).round().max(1.0) as usize;
        let n = cfg.dim;
        Ok(Self {
            substeps,
            q: Matrix::identity(n).scale(cfg.process_std.powi(2)),
            r: Matrix::identity(n).scale(cfg.obs_std.powi(2)),
            init_mean: vec![cfg.forcing; n],
            init_cov: Matrix::identity(n).scale(cfg.init_std.powi(2)),
            cfg,
        })
    }
}

impl StateSpaceModel for Lorenz96Model {
    fn name(&self) -> &str {
        "lorenz96"
    }
    fn dim_x(&self) -> usize {
        self.cfg.dim
    }
    fn dim_u(&self) -> usize {
        0
    }
    fn dim_y(&self) -> usize {
        self.cfg.dim
    }
    fn dt(&self) -> f64 {
        self.cfg.obs_interval
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
        let f = self.cfg.forcing;
        // dimension was checked at construction, so the drift cannot fail
        Ok(rk4_integrate(
            |s| lorenz96_drift(s, f).expect("dimension checked"),
            x,
            self.cfg.obs_interval,
            self.substeps,
        ))
    }

    fn observe(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn observation_jacobian(&self, _x: &[f64]) -> Result<Matrix> {
        Ok(Matrix::identity(self.cfg.dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Index-by-index evaluation with explicit 1-based cyclic boundary values.
    fn drift_oracle(x: &[f64], f: f64) -> Vec<f64> {
        let j = x.len();
        let at = |k: isize| -> f64 {
            // X_{-1} = X_{J-1}, X_0 = X_J, X_{J+1} = X_1 (1-based)
            let k = if k < 1 {
                k + j as isize
            } else if k > j as isize {
                k - j as isize
            } else {
                k
            };
            x[(k - 1) as usize]
        };
        (1..=j as isize)
            .map(|k| (at(k + 1) - at(k - 2)) * at(k - 1) - at(k) + f)
            .collect()
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        for f in [0.0, 1.5, 8.0] {
            assert!(lorenz96_drift(&[f; 8], f)
                .unwrap()
                .iter()
                .all(|&d| d == 0.0));
        }
    }

    #[test]
    fn hand_evaluated_example() {
        let got = lorenz96_drift(&[1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
        assert_eq!(got, vec![-5.0, -3.0, 3.0, -7.0]);
        assert_eq!(got, drift_oracle(&[1.0, 2.0, 3.0, 4.0], 0.0));
    }

    #[test]
    fn zero_state_returns_forcing() {
        assert_eq!(lorenz96_drift(&[0.0; 6], 8.0).unwrap(), vec![8.0; 6]);
    }

    #[test]
    fn matches_oracle_on_random_states() {
        let mut rng = crate::rng::rng_from_seed(1);
        for j in 4..12 {
            let x: Vec<f64> = (0..j)
                .map(|_| crate::rng::standard_normal(&mut rng) * 3.0)
                .collect();
            let a = lorenz96_drift(&x, 8.0).unwrap();
            let b = drift_oracle(&x, 8.0);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_small_dimension_rejected() {
        assert!(matches!(
            lorenz96_drift(&[1.0; 3], 8.0),
            Err(ScenarioError::DimensionTooSmall(_))
        ));
        let cfg = Lorenz96Config {
            dim: 3,
            ..Default::default()
        };
        assert!(Lorenz96Model::new(cfg).is_err());
    }

    #[test]
    fn perturbed_twins_separate() {
        let cfg = Lorenz96Config::default();
        let model = Lorenz96Model::new(cfg).unwrap();
        let mut a = vec![8.0; 8];
        a[3] += 0.01;
        let mut b = a.clone();
        b[0] += 1e-8;
        let initial = 1e-8;
        for _ in 0..400 {
            a = model.transition(&a, &[]).unwrap();
            b = model.transition(&b, &[]).unwrap();
        }
        let sep = crate::linalg::norm(&crate::linalg::sub(&a, &b));
        assert!(sep > 1e3 * initial, "separation {sep}");
    }
}
