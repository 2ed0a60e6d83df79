//! Model-free recurrent estimator: a GRU trained on (observation, control)
//! sequences to output the state, with hand-written BPTT and Adam.
//!
//! Inputs `[y_t, u_t]` and targets `x_{t+1}` are standardized per component
//! with training-set statistics; the [`Normalizer`] travels with the model.

mod gru;

pub use gru::{Gru, GruShape};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{check_envelope, Dataset, DatasetError};
use crate::rng::{mix, rng_from_seed};
use crate::scenarios::{ScenarioConfig, Trajectory};

pub const MODEL_MAGIC: &[u8; 4] = b"NLFM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model file: {0}")]
    Format(#[from] DatasetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

/// Per-component affine standardization of inputs and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

fn mean_std<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; dim];
    let mut n = 0.0;
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
        n += 1.0;
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    // constant components are left unscaled
    let std = var
        .into_iter()
        .map(|s| (s / n).sqrt())
        .map(|s| if s > 1e-12 { s } else { 1.0 })
        .collect();
    (mean, std)
}

/// Network input at step `t`: `[y_t, u_t]`.
fn raw_inputs(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.observations
        .iter()
        .zip(&traj.controls)
        .map(|(y, u)| y.iter().chain(u).copied().collect())
        .collect()
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(NeuralError::InvalidArgument("empty training set".into()));
        }
        let dims = train.dims()?;
        let inputs: Vec<Vec<f64>> = train.trajectories.iter().flat_map(raw_inputs).collect();
        let (input_mean, input_std) =
            mean_std(inputs.iter().map(|v| v.as_slice()), dims.y + dims.u);
        let targets = train
            .trajectories
            .iter()
            .flat_map(|t| t.targets().iter().map(|v| v.as_slice()));
        let (target_mean, target_std) = mean_std(targets, dims.x);
        Ok(Self {
            input_mean,
            input_std,
            target_mean,
            target_std,
        })
    }

    fn apply(v: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(mean)
            .zip(std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn standardize_input(&self, v: &[f64]) -> Vec<f64> {
        Self::apply(v, &self.input_mean, &self.input_std)
    }

    pub fn standardize_target(&self, v: &[f64]) -> Vec<f64> {
        Self::apply(v, &self.target_mean, &self.target_std)
    }

    pub fn destandardize_target(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.target_mean)
            .zip(&self.target_std)
            .map(|((z, m), s)| z * s + m)
            .collect()
    }
}

/// One standardized training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Sample {
    pub fn from_trajectory(traj: &Trajectory, norm: &Normalizer) -> Self {
        Self {
            inputs: raw_inputs(traj)
                .iter()
                .map(|x| norm.standardize_input(x))
                .collect(),
            targets: traj
                .targets()
                .iter()
                .map(|x| norm.standardize_target(x))
                .collect(),
        }
    }
}

fn value_count(batch: &[Sample]) -> usize {
    batch
        .iter()
        .map(|s| s.targets.iter().map(Vec::len).sum::<usize>())
        .sum()
}

/// Mean squared error over every step and component of `batch`, and its gradient.
///
/// Per-sequence gradients are computed in parallel and summed in batch
/// order, so the result does not depend on the number of workers.
pub fn loss_and_gradients(model: &Gru, batch: &[Sample]) -> (f64, Vec<f64>) {
    let count = value_count(batch);
    if count == 0 {
        return (0.0, vec![0.0; model.param_count()]);
    }
    let scale = 1.0 / count as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| {
            let mut g = vec![0.0; model.param_count()];
            let sse = model.sse_and_gradient(&s.inputs, &s.targets, scale, &mut g);
            (sse, g)
        })
        .collect();
    let mut grad = vec![0.0; model.param_count()];
    let mut sse = 0.0;
    for (s, g) in parts {
        sse += s;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (sse * scale, grad)
}

/// Mean squared error without gradients.
pub fn loss(model: &Gru, batch: &[Sample]) -> f64 {
    let count = value_count(batch);
    let sse: Vec<f64> = batch
        .par_iter()
        .map(|s| {
            model
                .forward(&s.inputs)
                .iter()
                .zip(&s.targets)
                .flat_map(|(y, t)| y.iter().zip(t).map(|(a, b)| (a - b).powi(2)))
                .sum()
        })
        .collect();
    sse.iter().sum::<f64>() / count as f64
}

/// Largest relative discrepancy between analytic gradients and central
/// differences of the loss with step `h`.
pub fn gradient_check(model: &Gru, batch: &[Sample], h: f64) -> f64 {
    let (_, analytic) = loss_and_gradients(model, batch);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..model.param_count() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = loss(&probe, batch);
        probe.params_mut()[i] = orig - h;
        let down = loss(&probe, batch);
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update in place. Advances the step counter.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub patience: usize,
    /// Validate every this many epochs.
    pub val_interval: usize,
    pub seed: u64,
    /// Rescale the gradient when its norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            batch_size: 32,
            max_epochs: 100,
            learning_rate: 3e-3,
            patience: 10,
            val_interval: 1,
            seed: 0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.patience == 0 || self.val_interval == 0
        {
            return Err(NeuralError::InvalidArgument(
                "hidden, batch size, patience and validation interval must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_val_loss: f64,
}

/// Loss per validation checkpoint. Epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(|e| NeuralError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A trained network plus everything needed to run it on raw trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub scenario: ScenarioConfig,
    pub gru: Gru,
    pub normalizer: Normalizer,
    pub train_config: TrainConfig,
}

fn check_same_scenario(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.config != b.config {
        return Err(NeuralError::InvalidArgument(
            "training and validation sets come from different scenario configs".into(),
        ));
    }
    Ok(())
}

/// Minibatch Adam on the standardized MSE with early stopping.
///
/// The best-validation parameters are restored at the end, so the returned
/// model never validates worse than the initial one. Bit-deterministic for a
/// given seed regardless of the number of rayon workers.
pub fn train(
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainingHistory)> {
    config.validate()?;
    check_same_scenario(train, val)?;
    if val.is_empty() {
        return Err(NeuralError::InvalidArgument("empty validation set".into()));
    }
    let normalizer = Normalizer::fit(train)?;
    let dims = train.dims()?;
    let shape = GruShape {
        input: dims.y + dims.u,
        hidden: config.hidden,
        output: dims.x,
    };
    let train_set: Vec<Sample> = train
        .trajectories
        .iter()
        .map(|t| Sample::from_trajectory(t, &normalizer))
        .collect();
    let val_set: Vec<Sample> = val
        .trajectories
        .iter()
        .map(|t| Sample::from_trajectory(t, &normalizer))
        .collect();

    let mut model = Gru::new(shape, &mut rng_from_seed(mix(config.seed, 0)));
    let mut shuffle_rng = rng_from_seed(mix(config.seed, 1));
    let mut adam = AdamState::new(model.param_count(), config.learning_rate);

    let mut best_val = loss(&model, &val_set);
    let mut best_params = model.params().to_vec();
    let mut history = TrainingHistory {
        records: vec![EpochRecord {
            epoch: 0,
            train_loss: loss(&model, &train_set),
            val_loss: best_val,
            best_val_loss: best_val,
        }],
        best_epoch: 0,
        stopped_early: false,
    };
    let mut bad_checks = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<Sample> = idx.iter().map(|&i| train_set[i].clone()).collect();
            let (l, mut grad) = loss_and_gradients(&model, &batch);
            if let Some(c) = config.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    grad.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            adam_update(model.params_mut(), &grad, &mut adam);
            epoch_loss += l;
            batches += 1;
        }
        if epoch % config.val_interval != 0 {
            continue;
        }
        let val_loss = loss(&model, &val_set);
        if val_loss < best_val {
            best_val = val_loss;
            best_params.copy_from_slice(model.params());
            history.best_epoch = epoch;
            bad_checks = 0;
        } else {
            bad_checks += 1;
        }
        history.records.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches as f64,
            val_loss,
            best_val_loss: best_val,
        });
        if bad_checks >= config.patience {
            history.stopped_early = true;
            break;
        }
    }
    model.params_mut().copy_from_slice(&best_params);
    Ok((
        TrainedModel {
            scenario: train.config.clone(),
            gru: model,
            normalizer,
            train_config: *config,
        },
        history,
    ))
}

/// Causal state estimates for every observation of `traj`, in physical units.
pub fn run_neural_estimator(model: &TrainedModel, traj: &Trajectory) -> Vec<Vec<f64>> {
    let inputs: Vec<Vec<f64>> = raw_inputs(traj)
        .iter()
        .map(|x| model.normalizer.standardize_input(x))
        .collect();
    model
        .gru
        .forward(&inputs)
        .iter()
        .map(|z| model.normalizer.destandardize_target(z))
        .collect()
}

/// Baseline that predicts the training-set mean state at every step.
pub fn constant_predictor(normalizer: &Normalizer, horizon: usize) -> Vec<Vec<f64>> {
    vec![normalizer.target_mean.clone(); horizon]
}

#[derive(Serialize, Deserialize)]
struct ModelMetadata {
    format_version: u32,
    scenario: ScenarioConfig,
    shape: GruShape,
    param_count: usize,
    normalizer: Normalizer,
    train_config: TrainConfig,
}

/// NLFM bytes: magic, version, length-prefixed JSON metadata, parameters as
/// little-endian f64, CRC-32 trailer.
pub fn encode_model(model: &TrainedModel) -> Vec<u8> {
    let meta = ModelMetadata {
        format_version: MODEL_FORMAT_VERSION,
        scenario: model.scenario.clone(),
        shape: model.gru.shape(),
        param_count: model.gru.param_count(),
        normalizer: model.normalizer.clone(),
        train_config: model.train_config,
    };
    let json = serde_json::to_vec(&meta).expect("model metadata serializes");
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for p in model.gru.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let (version, body) = check_envelope(bytes, MODEL_MAGIC)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        }
        .into());
    }
    let malformed = |m: &str| NeuralError::Format(DatasetError::Malformed(m.to_string()));
    let len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
    let json = body
        .get(12..12 + len)
        .ok_or_else(|| malformed("metadata overruns file"))?;
    let meta: ModelMetadata =
        serde_json::from_slice(json).map_err(|e| malformed(&e.to_string()))?;
    let payload = &body[12 + len..];
    if payload.len() != meta.param_count * 8 {
        return Err(malformed("parameter count disagrees with payload"));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let gru = Gru::from_params(meta.shape, params)
        .ok_or_else(|| malformed("parameters invalid for shape"))?;
    Ok(TrainedModel {
        scenario: meta.scenario,
        gru,
        normalizer: meta.normalizer,
        train_config: meta.train_config,
    })
}

pub fn write_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    decode_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate_chunked_dataset, generate_dataset, Role};
    use crate::metrics::aggregate;
    use crate::rng::{standard_normal, uniform};
    use crate::scenarios::{LinearConfig, ScenarioKind};

    fn random_batch(seed: u64, shape: GruShape, n: usize, len: usize) -> Vec<Sample> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| Sample {
                inputs: (0..len)
                    .map(|_| {
                        (0..shape.input)
                            .map(|_| standard_normal(&mut rng))
                            .collect()
                    })
                    .collect(),
                targets: (0..len)
                    .map(|_| {
                        (0..shape.output)
                            .map(|_| standard_normal(&mut rng))
                            .collect()
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for case in 0..20u64 {
            let mut rng = rng_from_seed(1000 + case);
            let shape = GruShape {
                input: 1 + (uniform(&mut rng) * 3.0) as usize,
                hidden: 3,
                output: 1 + (uniform(&mut rng) * 3.0) as usize,
            };
            let model = Gru::new(shape, &mut rng);
            let batch = random_batch(case, shape, 2, 5);
            let err = gradient_check(&model, &batch, 1e-5);
            assert!(err < 1e-4, "case {case}: relative error {err}");
        }
    }

    #[test]
    fn duplicated_batch_has_same_loss_and_gradient() {
        let shape = GruShape {
            input: 2,
            hidden: 4,
            output: 2,
        };
        let model = Gru::new(shape, &mut rng_from_seed(3));
        let batch = random_batch(9, shape, 3, 6);
        let doubled: Vec<Sample> = batch.iter().chain(&batch).cloned().collect();
        let (l1, g1) = loss_and_gradients(&model, &batch);
        let (l2, g2) = loss_and_gradients(&model, &doubled);
        assert!((l1 - l2).abs() < 1e-12 * l1);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn adam_examples() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut s = AdamState::new(3, 0.01);
        adam_update(&mut p, &[0.0; 3], &mut s);
        assert_eq!(p, vec![1.0, -2.0, 0.5]);

        let mut p = vec![1.0, -2.0, 0.5];
        let mut s = AdamState::new(3, 0.01);
        adam_update(&mut p, &[3.0, -0.2, 1e-3], &mut s);
        let moved: Vec<f64> = p.iter().zip([1.0, -2.0, 0.5]).map(|(a, b)| a - b).collect();
        assert!((moved[0] + 0.01).abs() < 1e-9);
        assert!((moved[1] - 0.01).abs() < 1e-9);
        assert!((moved[2] + 0.01).abs() < 1e-7);

        // the second identical call sees advanced state and moves differently
        let before = s.clone();
        adam_update(&mut p, &[3.0, -0.2, 1e-3], &mut s);
        assert_eq!(s.step, before.step + 1);
        assert_ne!(s.m, before.m);
    }

    #[test]
    fn standardization_round_trips() {
        let ds = generate_dataset(
            &ScenarioConfig::default_for(ScenarioKind::Pendulum),
            3,
            20,
            1,
            Role::Train,
        )
        .unwrap();
        let n = Normalizer::fit(&ds).unwrap();
        for x in ds.trajectories[1].targets() {
            let back = n.destandardize_target(&n.standardize_target(x));
            for (a, b) in back.iter().zip(x) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn learns_a_constant_state() {
        // states stay exactly at 2.5; observations are pure noise
        let cfg = ScenarioConfig::Linear(LinearConfig::scalar(1.0, 1.0, 0.0, 1.0, 2.5, 0.0));
        let train_ds = generate_dataset(&cfg, 16, 10, 1, Role::Train).unwrap();
        let val_ds = generate_dataset(&cfg, 4, 10, 2, Role::Val).unwrap();
        let config = TrainConfig {
            hidden: 4,
            batch_size: 8,
            max_epochs: 50,
            patience: 50,
            ..TrainConfig::default()
        };
        let (model, history) = train(&train_ds, &val_ds, &config).unwrap();
        let last = history.records.last().unwrap();
        assert!(last.train_loss < 1e-4, "train loss {}", last.train_loss);
        let est = run_neural_estimator(&model, &val_ds.trajectories[0]);
        assert!(est.iter().all(|e| (e[0] - 2.5).abs() < 0.05));
    }

    #[test]
    fn training_is_deterministic_across_worker_counts() {
        let cfg = ScenarioConfig::default_for(ScenarioKind::Bot);
        let tr = generate_chunked_dataset(&cfg, 24, 15, 60, 1, Role::Train).unwrap();
        let va = generate_chunked_dataset(&cfg, 8, 15, 60, 2, Role::Val).unwrap();
        let config = TrainConfig {
            hidden: 6,
            max_epochs: 4,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| encode_model(&train(&tr, &va, &config).unwrap().0))
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
    }

    #[test]
    fn best_checkpoint_contract() {
        let cfg = ScenarioConfig::default_for(ScenarioKind::Lorenz96);
        let tr = generate_chunked_dataset(&cfg, 20, 20, 60, 3, Role::Train).unwrap();
        let va = generate_chunked_dataset(&cfg, 6, 20, 60, 4, Role::Val).unwrap();
        let config = TrainConfig {
            hidden: 8,
            max_epochs: 8,
            patience: 2,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (model, history) = train(&tr, &va, &config).unwrap();
        let val_set: Vec<Sample> = va
            .trajectories
            .iter()
            .map(|t| Sample::from_trajectory(t, &model.normalizer))
            .collect();
        let final_val = loss(&model.gru, &val_set);
        assert!(final_val <= history.records[0].val_loss);
        assert_eq!(final_val, history.records.last().unwrap().best_val_loss);
        for w in history.records.windows(2) {
            assert!(w[1].best_val_loss <= w[0].best_val_loss);
        }
        let mut csv = Vec::new();
        history.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,best_val_loss\n0,"));
        assert_eq!(text.lines().count(), history.records.len() + 1);
    }

    #[test]
    fn estimator_is_causal_over_longer_horizons() {
        let cfg = ScenarioConfig::default_for(ScenarioKind::Ballistic);
        let tr = generate_dataset(&cfg, 4, 20, 1, Role::Train).unwrap();
        let norm = Normalizer::fit(&tr).unwrap();
        let shape = GruShape {
            input: 1,
            hidden: 5,
            output: 3,
        };
        let model = TrainedModel {
            scenario: tr.config.clone(),
            gru: Gru::new(shape, &mut rng_from_seed(0)),
            normalizer: norm,
            train_config: TrainConfig::default(),
        };
        let long = generate_dataset(&cfg, 1, 500, 9, Role::Eval)
            .unwrap()
            .trajectories
            .remove(0);
        let full = run_neural_estimator(&model, &long);
        assert_eq!(full.len(), 500);
        let head = run_neural_estimator(&model, &long.truncated(100));
        assert_eq!(full[..100], head[..]);
        let truth = vec![long.targets().to_vec()];
        assert!(aggregate(&[full], &truth).unwrap().rmse_avg.is_finite());
    }

    #[test]
    fn model_file_round_trip_and_corruption() {
        let cfg = ScenarioConfig::default_for(ScenarioKind::Quadrotor);
        let tr = generate_dataset(&cfg, 3, 10, 1, Role::Train).unwrap();
        let model = TrainedModel {
            scenario: tr.config.clone(),
            gru: Gru::new(
                GruShape {
                    input: 5,
                    hidden: 4,
                    output: 6,
                },
                &mut rng_from_seed(2),
            ),
            normalizer: Normalizer::fit(&tr).unwrap(),
            train_config: TrainConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nlfm");
        write_model(&model, &path).unwrap();
        assert_eq!(read_model(&path).unwrap(), model);

        let bytes = encode_model(&model);
        assert!(matches!(
            decode_model(&bytes[..bytes.len() - 3]),
            Err(NeuralError::Format(DatasetError::ChecksumMismatch))
        ));
        let mut wrong = bytes.clone();
        wrong[..4].copy_from_slice(b"NLFB");
        assert!(matches!(
            decode_model(&wrong),
            Err(NeuralError::Format(DatasetError::BadMagic))
        ));
    }

    #[test]
    fn mismatched_datasets_are_rejected() {
        let a = generate_dataset(
            &ScenarioConfig::default_for(ScenarioKind::Bot),
            2,
            5,
            1,
            Role::Train,
        )
        .unwrap();
        let b = generate_dataset(
            &ScenarioConfig::default_for(ScenarioKind::Ballistic),
            2,
            5,
            1,
            Role::Val,
        )
        .unwrap();
        assert!(train(&a, &b, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(train(&a, &a, &bad).is_err());
    }
}
