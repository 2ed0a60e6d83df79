//! Throughput measurement in iterations per second.
//!
//! One iteration is one estimator step over every trajectory of the batch.
//! The batch is materialized before the clock starts, so generation and I/O
//! never enter the measurement.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::filters::{Filter, FilterConfig, FilterError};
use crate::neural::TrainedModel;
use crate::rng::mix;
use crate::scenarios::{StateSpaceModel, Trajectory};

pub const DEFAULT_WARMUP: usize = 50;
pub const DEFAULT_ITERS: usize = 500;
pub const MIN_ITERS: usize = 100;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// What gets timed.
#[derive(Debug, Clone, Copy)]
pub enum Estimator<'a> {
    /// Touches the inputs and does nothing else; an upper bound on the harness.
    Noop,
    Filter(FilterConfig),
    Gru(&'a TrainedModel),
}

impl Estimator<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Noop => "noop",
            Estimator::Filter(c) => c.name(),
            Estimator::Gru(_) => "gru",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Trajectories of the batch are stepped one after another on one thread.
    Serial,
    /// Trajectories are stepped concurrently on the rayon pool; the report
    /// then measures aggregate throughput.
    Parallel,
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecMode::Serial => "serial",
            ExecMode::Parallel => "parallel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSettings {
    pub warmup: usize,
    pub iters: usize,
    pub mode: ExecMode,
    /// Seeds the ensemble and particle streams.
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            warmup: DEFAULT_WARMUP,
            iters: DEFAULT_ITERS,
            mode: ExecMode::Serial,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub method: String,
    pub scenario: String,
    pub batch: usize,
    pub warmup: usize,
    pub iters: usize,
    pub mode: ExecMode,
    pub iter_per_sec: f64,
    /// Time spent in the measured iterations only.
    pub wall_clock: Duration,
}

/// A single stream being estimated step by step.
trait Stepper: Send {
    fn step(&mut self, u: &[f64], y: &[f64]);
}

struct NoopStepper {
    sink: f64,
}

impl Stepper for NoopStepper {
    fn step(&mut self, u: &[f64], y: &[f64]) {
        self.sink = std::hint::black_box(y.first().or(u.first()).copied().unwrap_or(0.0));
    }
}

impl Stepper for Filter<'_> {
    fn step(&mut self, u: &[f64], y: &[f64]) {
        // a failed update leaves the belief untouched; the cost is still paid
        let _ = std::hint::black_box(Filter::step(self, u, y));
    }
}

struct GruStepper<'a> {
    model: &'a TrainedModel,
    hidden: Vec<f64>,
}

impl Stepper for GruStepper<'_> {
    fn step(&mut self, u: &[f64], y: &[f64]) {
        let x: Vec<f64> = y.iter().chain(u).copied().collect();
        let z = self.model.gru.step_stream(
            &self.model.normalizer.standardize_input(&x),
            &mut self.hidden,
        );
        std::hint::black_box(self.model.normalizer.destandardize_target(&z));
    }
}

fn instantiate<'a>(
    estimator: &Estimator<'a>,
    model: &'a dyn StateSpaceModel,
    seed: u64,
) -> Result<Box<dyn Stepper + 'a>> {
    Ok(match *estimator {
        Estimator::Noop => Box::new(NoopStepper { sink: 0.0 }),
        Estimator::Filter(config) => Box::new(Filter::new(config, model, seed)?),
        Estimator::Gru(m) => Box::new(GruStepper {
            model: m,
            hidden: vec![0.0; m.gru.shape().hidden],
        }),
    })
}

/// Times `settings.iters` batch steps after `settings.warmup` untimed ones.
///
/// When the run is longer than the trajectories, stepping wraps around to
/// step 0 and every estimator restarts from its prior, as if a fresh batch
/// had arrived; the restart is included in the timing.
pub fn measure_throughput<'a>(
    estimator: &Estimator<'a>,
    model: &'a dyn StateSpaceModel,
    batch: &[Trajectory],
    settings: &BenchSettings,
) -> Result<ThroughputReport> {
    if settings.warmup < 1 {
        return Err(BenchError::InvalidArgument(
            "warmup must be at least 1".into(),
        ));
    }
    if settings.iters < MIN_ITERS {
        return Err(BenchError::InvalidArgument(format!(
            "iters must be at least {MIN_ITERS}"
        )));
    }
    if batch.is_empty() {
        return Err(BenchError::InvalidArgument("empty batch".into()));
    }
    for t in batch {
        t.validate(model.dim_x(), model.dim_u(), model.dim_y())
            .map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
    }
    let horizon = batch.iter().map(Trajectory::horizon).min().unwrap_or(0);
    if horizon == 0 {
        return Err(BenchError::InvalidArgument(
            "trajectories have no steps".into(),
        ));
    }

    type Steppers<'s> = Vec<Box<dyn Stepper + 's>>;
    let fresh = || -> Result<Steppers<'a>> {
        (0..batch.len())
            .map(|i| instantiate(estimator, model, mix(settings.seed, i as u64)))
            .collect()
    };
    let mut steppers = fresh()?;
    let run = |steppers: &mut Steppers<'a>, k: usize| -> Result<()> {
        let t = k % horizon;
        if t == 0 && k > 0 {
            *steppers = fresh()?;
        }
        match settings.mode {
            ExecMode::Serial => {
                for (s, traj) in steppers.iter_mut().zip(batch) {
                    s.step(&traj.controls[t], &traj.observations[t]);
                }
            }
            ExecMode::Parallel => {
                steppers
                    .par_iter_mut()
                    .zip(batch.par_iter())
                    .for_each(|(s, traj)| s.step(&traj.controls[t], &traj.observations[t]));
            }
        }
        Ok(())
    };

    for k in 0..settings.warmup {
        run(&mut steppers, k)?;
    }
    let start = Instant::now();
    for k in settings.warmup..settings.warmup + settings.iters {
        run(&mut steppers, k)?;
    }
    let wall_clock = start.elapsed();
    // a zero reading would mean the clock is coarser than the whole run
    let secs = wall_clock.as_secs_f64().max(1e-9);

    Ok(ThroughputReport {
        method: estimator.name().to_string(),
        scenario: model.name().to_string(),
        batch: batch.len(),
        warmup: settings.warmup,
        iters: settings.iters,
        mode: settings.mode,
        iter_per_sec: settings.iters as f64 / secs,
        wall_clock,
    })
}

/// CSV with columns `method,scenario,batch,mode,iter_per_sec`.
pub fn write_throughput_csv<W: Write>(reports: &[ThroughputReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "scenario", "batch", "mode", "iter_per_sec"])?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.scenario.clone(),
            r.batch.to_string(),
            r.mode.to_string(),
            format!("{:.3}", r.iter_per_sec),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::PfParams;
    use crate::scenarios::{simulate_trajectory, PendulumConfig, PendulumModel};

    fn setup(batch: usize, horizon: usize) -> (PendulumModel, Vec<Trajectory>) {
        let model = PendulumModel::new(PendulumConfig::default()).unwrap();
        let trajs = (0..batch)
            .map(|i| simulate_trajectory(&model, horizon, i as u64).unwrap())
            .collect();
        (model, trajs)
    }

    fn settings(warmup: usize, iters: usize) -> BenchSettings {
        BenchSettings {
            warmup,
            iters,
            ..BenchSettings::default()
        }
    }

    #[test]
    fn report_echoes_request() {
        let (model, batch) = setup(3, 50);
        let s = BenchSettings {
            warmup: 7,
            iters: 123,
            mode: ExecMode::Parallel,
            seed: 9,
        };
        let r =
            measure_throughput(&Estimator::Filter(FilterConfig::Ekf), &model, &batch, &s).unwrap();
        assert_eq!(r.method, "ekf");
        assert_eq!(r.scenario, "pendulum");
        assert_eq!(
            (r.batch, r.warmup, r.iters, r.mode),
            (3, 7, 123, ExecMode::Parallel)
        );
        assert!(r.iter_per_sec > 0.0);
        assert!(r.wall_clock > Duration::ZERO);
    }

    #[test]
    fn preconditions_are_enforced() {
        let (model, batch) = setup(1, 10);
        let noop = Estimator::Noop;
        assert!(measure_throughput(&noop, &model, &batch, &settings(0, 100)).is_err());
        assert!(measure_throughput(&noop, &model, &batch, &settings(1, 99)).is_err());
        assert!(measure_throughput(&noop, &model, &[], &settings(1, 100)).is_err());
    }

    #[test]
    fn noop_outruns_particle_filter() {
        let (model, batch) = setup(2, 60);
        let s = settings(5, 100);
        let noop = measure_throughput(&Estimator::Noop, &model, &batch, &s).unwrap();
        let pf = Estimator::Filter(FilterConfig::Pf(PfParams::default()));
        let pf = measure_throughput(&pf, &model, &batch, &s).unwrap();
        assert!(noop.iter_per_sec > pf.iter_per_sec, "{noop:?} vs {pf:?}");
    }

    #[test]
    fn rate_is_stable_when_iterations_double() {
        // concurrent tests share the cores, so the two lengths are timed
        // alternately and the best repeat of each estimates the uncontended rate
        let (model, batch) = setup(8, 2000);
        let est = Estimator::Filter(FilterConfig::Ekf);
        let rate = |iters: usize| {
            measure_throughput(&est, &model, &batch, &settings(50, iters))
                .unwrap()
                .iter_per_sec
        };
        let (mut one, mut two) = (0.0f64, 0.0f64);
        for _ in 0..7 {
            one = one.max(rate(500));
            two = two.max(rate(1000));
        }
        assert!((two / one - 1.0).abs() < 0.10, "{one} vs {two}");
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let (model, batch) = setup(1, 20);
        let r = measure_throughput(&Estimator::Noop, &model, &batch, &settings(1, 100)).unwrap();
        let mut buf = Vec::new();
        write_throughput_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "method,scenario,batch,mode,iter_per_sec");
        assert!(lines[1].starts_with("noop,pendulum,1,serial,"));
    }
}
