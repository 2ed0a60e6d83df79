//! Stochastic (perturbed-observation) ensemble Kalman filter.

use super::kalman::gain_from;
use super::{FilterError, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{GaussianSampler, SimRng};
use crate::scenarios::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn new(members: Vec<Vec<f64>>) -> Result<Self> {
        if members.len() < 2 {
            return Err(FilterError::InvalidArgument(
                "an ensemble needs at least 2 members".into(),
            ));
        }
        let n = members[0].len();
        if members.iter().any(|m| m.len() != n) {
            return Err(FilterError::InvalidArgument(
                "ensemble members differ in dimension".into(),
            ));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Vec<f64>] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.members[0].len()];
        let w = 1.0 / self.size() as f64;
        for x in &self.members {
            linalg::axpy(w, x, &mut m);
        }
        m
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> Matrix {
        let mean = self.mean();
        let n = mean.len();
        let mut c = Matrix::zeros(n, n);
        let w = 1.0 / (self.size() - 1) as f64;
        for x in &self.members {
            let d = linalg::sub(x, &mean);
            c.add_outer(w, &d, &d);
        }
        c
    }
}

/// Propagates every member through the dynamics with its own process-noise
/// draw, then scales spread about the mean by `inflation`.
pub fn enkf_forecast(
    ensemble: &Ensemble,
    model: &dyn StateSpaceModel,
    u: &[f64],
    rng: &mut SimRng,
    inflation: f64,
) -> Result<Ensemble> {
    let process = GaussianSampler::new(model.process_noise())?;
    let mut members = Vec::with_capacity(ensemble.size());
    for x in ensemble.members() {
        let mut next = model.transition(x, u)?;
        process.perturb(&mut next, rng);
        members.push(next);
    }
    let mut forecast = Ensemble { members };
    if inflation != 1.0 {
        let mean = forecast.mean();
        for x in &mut forecast.members {
            for (xi, mi) in x.iter_mut().zip(&mean) {
                *xi = mi + inflation * (*xi - mi);
            }
        }
    }
    Ok(forecast)
}

/// One EnKF cycle. Forecast noise for all members is drawn before any
/// observation perturbation, so the forecast is reproducible on its own.
pub fn enkf_step(
    ensemble: &Ensemble,
    model: &dyn StateSpaceModel,
    u: &[f64],
    y: &[f64],
    rng: &mut SimRng,
    inflation: f64,
) -> Result<Ensemble> {
    let forecast = enkf_forecast(ensemble, model, u, rng, inflation)?;
    let m = forecast.size();
    let observed = forecast
        .members()
        .iter()
        .map(|x| model.observe(x))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    // ensemble-mean observation, averaged through residuals against member 0
    let anchor = &observed[0];
    let mut y_mean = anchor.clone();
    let w = 1.0 / m as f64;
    for obs in &observed {
        linalg::axpy(w, &model.observation_residual(obs, anchor), &mut y_mean);
    }
    let x_mean = forecast.mean();

    let n = x_mean.len();
    let p = y.len();
    let mut cross = Matrix::zeros(n, p);
    let mut s = Matrix::zeros(p, p);
    let wc = 1.0 / (m - 1) as f64;
    for (x, obs) in forecast.members().iter().zip(&observed) {
        let dx = linalg::sub(x, &x_mean);
        let dy = model.observation_residual(obs, &y_mean);
        cross.add_outer(wc, &dx, &dy);
        s.add_outer(wc, &dy, &dy);
    }
    let mut s = s.add(model.observation_noise());
    s.symmetrize();
    let k = gain_from(&cross, &s)?;

    let perturb = GaussianSampler::new(model.observation_noise())?;
    let mut members = forecast.members;
    for (x, obs) in members.iter_mut().zip(&observed) {
        let mut innovation = model.observation_residual(y, obs);
        perturb.perturb(&mut innovation, rng);
        linalg::axpy(1.0, &k.mul_vec(&innovation), x);
    }
    Ok(Ensemble { members })
}
