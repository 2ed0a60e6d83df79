//! Scaled unscented transform and the unscented Kalman filter.

use serde::{Deserialize, Serialize};

use super::kalman::gain_from;
use super::{FilterError, GaussianBelief, Result};
use crate::linalg::{self, cholesky, Matrix};
use crate::scenarios::StateSpaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    /// `None` selects `κ = 3 − n`.
    pub kappa: Option<f64>,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints {
    pub points: Vec<Vec<f64>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

/// `2n + 1` sigma points of the scaled unscented transform.
///
/// `λ = α²(n + κ) − n`; points are `mean ± √(n + λ)·Lᵢ` for the columns of
/// the Cholesky factor `L` of the covariance.
pub fn sigma_points(
    belief: &GaussianBelief,
    alpha: f64,
    beta: f64,
    kappa: f64,
) -> Result<SigmaPoints> {
    let n = belief.dim();
    let nf = n as f64;
    let lambda = alpha * alpha * (nf + kappa) - nf;
    let spread = nf + lambda;
    if spread <= 0.0 {
        return Err(FilterError::InvalidArgument(format!(
            "n + λ must be positive, got {spread}"
        )));
    }
    let l = cholesky(&belief.cov).map_err(|_| FilterError::NotPositiveDefinite)?;
    let scale = spread.sqrt();

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(belief.mean.clone());
    for sign in [1.0, -1.0] {
        for j in 0..n {
            let p = belief
                .mean
                .iter()
                .enumerate()
                .map(|(i, m)| m + sign * scale * l[(i, j)])
                .collect();
            points.push(p);
        }
    }
    let w = 1.0 / (2.0 * spread);
    let mut mean_weights = vec![w; 2 * n + 1];
    let mut cov_weights = vec![w; 2 * n + 1];
    mean_weights[0] = lambda / spread;
    cov_weights[0] = lambda / spread + (1.0 - alpha * alpha + beta);
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

fn resolve_kappa(params: &UkfParams, n: usize) -> f64 {
    params.kappa.unwrap_or(3.0 - n as f64)
}

fn weighted_mean(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut mean = vec![0.0; points[0].len()];
    for (p, &w) in points.iter().zip(weights) {
        linalg::axpy(w, p, &mut mean);
    }
    mean
}

/// Unscented time update with additive process noise.
pub fn ukf_predict(
    belief: &GaussianBelief,
    model: &dyn StateSpaceModel,
    u: &[f64],
    params: &UkfParams,
) -> Result<GaussianBelief> {
    let n = belief.dim();
    let sp = sigma_points(belief, params.alpha, params.beta, resolve_kappa(params, n))?;
    let propagated = sp
        .points
        .iter()
        .map(|p| model.transition(p, u))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mean = weighted_mean(&propagated, &sp.mean_weights);
    let mut cov = model.process_noise().clone();
    for (p, &w) in propagated.iter().zip(&sp.cov_weights) {
        let d = linalg::sub(p, &mean);
        cov.add_outer(w, &d, &d);
    }
    cov.symmetrize();
    Ok(GaussianBelief::new(mean, cov))
}

/// Unscented measurement update; residuals go through the model's
/// `observation_residual`, so bearings are averaged and differenced on the circle.
pub fn ukf_update(
    prior: &GaussianBelief,
    model: &dyn StateSpaceModel,
    y: &[f64],
    params: &UkfParams,
) -> Result<GaussianBelief> {
    let n = prior.dim();
    let sp = sigma_points(prior, params.alpha, params.beta, resolve_kappa(params, n))?;
    let observed = sp
        .points
        .iter()
        .map(|p| model.observe(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    // mean observation relative to the central point, so wrapping is local
    let anchor = &observed[0];
    let mut y_mean = anchor.clone();
    for (obs, &w) in observed.iter().zip(&sp.mean_weights) {
        linalg::axpy(w, &model.observation_residual(obs, anchor), &mut y_mean);
    }

    let p = y.len();
    let mut s = model.observation_noise().clone();
    let mut cross = Matrix::zeros(n, p);
    for ((point, obs), &w) in sp.points.iter().zip(&observed).zip(&sp.cov_weights) {
        let dy = model.observation_residual(obs, &y_mean);
        let dx = linalg::sub(point, &prior.mean);
        s.add_outer(w, &dy, &dy);
        cross.add_outer(w, &dx, &dy);
    }
    s.symmetrize();
    let k = gain_from(&cross, &s)?;
    let innovation = model.observation_residual(y, &y_mean);
    let mut mean = prior.mean.clone();
    linalg::axpy(1.0, &k.mul_vec(&innovation), &mut mean);
    let mut cov = prior.cov.sub(&k.matmul(&s).matmul_t(&k));
    cov.symmetrize();
    Ok(GaussianBelief::new(mean, cov))
}

/// One unscented-Kalman-filter step.
pub fn ukf_step(
    belief: &GaussianBelief,
    model: &dyn StateSpaceModel,
    u: &[f64],
    y: &[f64],
    params: &UkfParams,
) -> Result<GaussianBelief> {
    let prior = ukf_predict(belief, model, u, params)?;
    ukf_update(&prior, model, y, params)
}
