mod bench;
mod evaluate;
mod filter;
mod generate;
mod sweep;
mod train;

pub use bench::bench;
pub use evaluate::evaluate;
pub use filter::filter;
pub use generate::{build_set, generate};
pub use sweep::sweep_noise;
pub use train::train;

use rayon::prelude::*;

use nlbench_core::filters::{run_filter, FilterConfig, Method};
use nlbench_core::linalg::Matrix;
use nlbench_core::neural::{run_neural_estimator, TrainedModel};
use nlbench_core::rng::mix;
use nlbench_core::scenarios::{NoiseOverride, StateSpaceModel, Trajectory};

use crate::error::{CliError, Result};

/// A resolved estimator ready to run over a dataset.
#[derive(Debug, Clone, Copy)]
pub enum Estimator<'a> {
    Filter(FilterConfig),
    Gru(&'a TrainedModel),
}

impl Estimator<'_> {
    pub fn method(&self) -> Method {
        match self {
            Estimator::Filter(FilterConfig::Ekf) => Method::Ekf,
            Estimator::Filter(FilterConfig::Ukf(_)) => Method::Ukf,
            Estimator::Filter(FilterConfig::Enkf(_)) => Method::Enkf,
            Estimator::Filter(FilterConfig::Pf(_)) => Method::Pf,
            Estimator::Gru(_) => Method::Gru,
        }
    }
}

/// Estimates for every trajectory of a set, in trajectory order.
#[derive(Debug, Clone)]
pub struct SetRun {
    pub estimates: Vec<Vec<Vec<f64>>>,
    pub diverged: usize,
}

/// Seed of filter run `init_index` on a dataset, shared by `evaluate` and
/// `sweep-noise` so both see the same random streams.
pub fn run_seed(dataset_seed: u64, user_seed: u64, init_index: u64) -> u64 {
    mix(mix(dataset_seed, user_seed), init_index)
}

/// Runs `estimator` over every trajectory in parallel. Trajectory `i` of a
/// filter run uses seed `mix(seed, i)`, so the output does not depend on
/// the number of workers.
pub fn run_set(
    estimator: &Estimator,
    model: &dyn StateSpaceModel,
    trajs: &[Trajectory],
    seed: u64,
) -> Result<SetRun> {
    let runs: Vec<(Vec<Vec<f64>>, bool)> = match estimator {
        Estimator::Filter(cfg) => trajs
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let run = run_filter(cfg, model, t, mix(seed, i as u64))?;
                let diverged = run.diverged();
                Ok((run.estimates, diverged))
            })
            .collect::<std::result::Result<_, CliError>>()?,
        Estimator::Gru(m) => trajs
            .par_iter()
            .map(|t| {
                let est = run_neural_estimator(m, t);
                let diverged = est.iter().flatten().any(|v| !v.is_finite());
                (est, diverged)
            })
            .collect(),
    };
    let diverged = runs.iter().filter(|r| r.1).count();
    Ok(SetRun {
        estimates: runs.into_iter().map(|r| r.0).collect(),
        diverged,
    })
}

pub fn truths(trajs: &[Trajectory]) -> Vec<Vec<Vec<f64>>> {
    trajs.iter().map(|t| t.targets().to_vec()).collect()
}

/// The filter's view of the model: same dynamics, observation-noise
/// standard deviation multiplied by `noise_scale`.
pub fn assumed_model(model: &dyn StateSpaceModel, noise_scale: f64) -> NoiseOverride<'_> {
    let r: Matrix = model.observation_noise().scale(noise_scale * noise_scale);
    NoiseOverride::new(model, model.process_noise().clone(), r)
}

/// Drops repeated methods, keeping first occurrences in order.
pub fn unique(methods: Vec<Method>) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::with_capacity(methods.len());
    for m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

/// Refuses to run a network on a scenario it was not trained for.
pub fn check_model_fits(model: &TrainedModel, scenario: &str, dim_x: usize) -> Result<()> {
    if model.scenario.name() != scenario || model.gru.shape().output != dim_x {
        return Err(CliError::invalid(format!(
            "model was trained on '{}' but the data is '{scenario}'",
            model.scenario.name()
        )));
    }
    Ok(())
}
