//! Error curves, aggregate scores, robust cross-run summaries and SNR.
//!
//! A run whose estimates contain any non-finite value is a divergence: its
//! curve is `∞` from the first bad step on and every scalar is `∞`.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::scenarios::{
    simulate_trajectory, NoiseOverride, ScenarioError, StateSpaceModel, Trajectory,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Per-trajectory sequences of state vectors: `[trajectory][step][component]`.
pub type Batch<'a> = &'a [Vec<Vec<f64>>];

fn check_shapes(estimates: Batch, truths: Batch) -> Result<usize> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(format!(
            "{} estimate sequences vs {} truth sequences",
            estimates.len(),
            truths.len()
        )));
    }
    let horizon = truths[0].len();
    for (i, (e, t)) in estimates.iter().zip(truths).enumerate() {
        if e.len() != horizon || t.len() != horizon {
            return Err(MetricsError::LengthMismatch(format!(
                "trajectory {i}: lengths differ"
            )));
        }
        if e.iter().zip(t).any(|(a, b)| a.len() != b.len()) {
            return Err(MetricsError::LengthMismatch(format!(
                "trajectory {i}: state dimensions differ"
            )));
        }
    }
    Ok(horizon)
}

/// `rmse[t] = sqrt(mean over trajectories and components of squared error at t)`.
pub fn rmse_curve(estimates: Batch, truths: Batch) -> Result<Vec<f64>> {
    let horizon = check_shapes(estimates, truths)?;
    let mut curve = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (e, x) in estimates.iter().zip(truths) {
            for (a, b) in e[t].iter().zip(&x[t]) {
                sum += (a - b).powi(2);
                count += 1;
            }
        }
        let v = (sum / count as f64).sqrt();
        curve.push(if v.is_finite() { v } else { f64::INFINITY });
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub rmse_avg: f64,
    pub mae: f64,
    pub medae: f64,
    pub nrmse: f64,
    pub auc: f64,
}

impl Aggregate {
    pub const DIVERGED: Aggregate = Aggregate {
        rmse_avg: f64::INFINITY,
        mae: f64::INFINITY,
        medae: f64::INFINITY,
        nrmse: f64::INFINITY,
        auc: f64::INFINITY,
    };

    pub fn is_diverged(&self) -> bool {
        self.rmse_avg.is_infinite()
    }

    pub fn values(&self) -> [(&'static str, f64); 5] {
        [
            ("rmse_avg", self.rmse_avg),
            ("mae", self.mae),
            ("medae", self.medae),
            ("nrmse", self.nrmse),
            ("auc", self.auc),
        ]
    }
}

/// Trapezoidal area under `curve` over integer step index.
pub fn trapezoid_auc(curve: &[f64]) -> f64 {
    curve.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
}

/// Scalar scores of one run.
///
/// `rmse_avg` is the mean of the curve, `mae`/`medae` the mean/median of all
/// absolute component errors, `nrmse` divides `rmse_avg` by the RMS magnitude
/// of the true states, and `auc` integrates the curve with the trapezoid rule.
pub fn aggregate(estimates: Batch, truths: Batch) -> Result<Aggregate> {
    let curve = rmse_curve(estimates, truths)?;
    if curve.iter().any(|c| c.is_infinite()) {
        return Ok(Aggregate::DIVERGED);
    }
    let mut abs_err = Vec::new();
    let mut truth_sq = 0.0;
    for (e, x) in estimates.iter().zip(truths) {
        for (es, xs) in e.iter().zip(x) {
            for (a, b) in es.iter().zip(xs) {
                abs_err.push((a - b).abs());
                truth_sq += b * b;
            }
        }
    }
    let rmse_avg = curve.iter().sum::<f64>() / curve.len() as f64;
    let truth_rms = (truth_sq / abs_err.len() as f64).sqrt();
    let mae = abs_err.iter().sum::<f64>() / abs_err.len() as f64;
    abs_err.sort_by(f64::total_cmp);
    Ok(Aggregate {
        rmse_avg,
        mae,
        medae: quantile_sorted(&abs_err, 0.5),
        nrmse: if truth_rms > 0.0 {
            rmse_avg / truth_rms
        } else {
            f64::INFINITY
        },
        auc: trapezoid_auc(&curve),
    })
}

/// Linear-interpolation quantile (R type 7) of ascending `sorted`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= n {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if b.is_infinite() {
        return b;
    }
    a + frac * (b - a)
}

fn sorted_with_divergence(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values
        .iter()
        .map(|&x| if x.is_finite() { x } else { f64::INFINITY })
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Median and interquartile range `Q3 − Q1` with type-7 quantiles.
/// Diverged runs count as `+∞`, so the median is `∞` only when at least
/// half of the runs diverged.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "median_iqr needs at least one value");
    let v = sorted_with_divergence(values);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = if q3.is_infinite() {
        f64::INFINITY
    } else {
        q3 - q1
    };
    (quantile_sorted(&v, 0.5), iqr)
}

/// Mean and 95% confidence half-width (Student t). `∞` if any run diverged.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean_ci95 needs at least one value");
    if values.iter().any(|v| !v.is_finite()) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n).sqrt())
}

/// `10·log10(signal / noise)`.
pub fn snr_from_powers(signal_power: f64, noise_power: f64) -> f64 {
    10.0 * (signal_power / noise_power).log10()
}

/// Observation SNR in dB with the observation-noise standard deviation
/// multiplied by `noise_scale`.
///
/// Powers are Monte-Carlo estimates over `n_traj` rollouts of `horizon`
/// steps: signal is the noise-free `h(x)`, noise is the (wrapped) residual
/// between the measured and the noise-free observation.
pub fn snr_db(
    model: &dyn StateSpaceModel,
    noise_scale: f64,
    n_traj: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    if !(noise_scale > 0.0 && noise_scale.is_finite()) {
        return Err(MetricsError::InvalidArgument(format!(
            "noise scale must be positive, got {noise_scale}"
        )));
    }
    if n_traj == 0 || horizon == 0 {
        return Err(MetricsError::InvalidArgument(
            "snr needs at least one step".into(),
        ));
    }
    let r: Matrix = model.observation_noise().scale(noise_scale * noise_scale);
    let scaled = NoiseOverride::new(model, model.process_noise().clone(), r);
    let trajectories = (0..n_traj)
        .map(|i| simulate_trajectory(&scaled, horizon, crate::rng::mix(seed, i as u64)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    observed_snr_db(&scaled, &trajectories)
}

/// Observation SNR in dB of already simulated trajectories. `model` supplies
/// `h` and the residual convention and must be the one that generated them.
pub fn observed_snr_db(model: &dyn StateSpaceModel, trajectories: &[Trajectory]) -> Result<f64> {
    let (mut signal, mut noise, mut count) = (0.0, 0.0, 0usize);
    for traj in trajectories {
        for (x, y) in traj.targets().iter().zip(&traj.observations) {
            let clean = model.observe(x)?;
            let resid = model.observation_residual(y, &clean);
            signal += clean.iter().map(|v| v * v).sum::<f64>();
            noise += resid.iter().map(|v| v * v).sum::<f64>();
            count += clean.len();
        }
    }
    if count == 0 {
        return Err(MetricsError::InvalidArgument(
            "snr needs at least one step".into(),
        ));
    }
    Ok(snr_from_powers(signal / count as f64, noise / count as f64))
}

/// Scores of one (method, dataset, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub run_id: String,
    pub rmse_per_timestep: Vec<f64>,
    pub scores: Aggregate,
}

impl MetricsReport {
    pub fn from_run(run_id: impl Into<String>, estimates: Batch, truths: Batch) -> Result<Self> {
        let curve = rmse_curve(estimates, truths)?;
        let scores = aggregate(estimates, truths)?;
        Ok(Self {
            run_id: run_id.into(),
            rmse_per_timestep: curve,
            scores,
        })
    }

    /// A run that broke down: `∞` everywhere.
    pub fn diverged(run_id: impl Into<String>, horizon: usize) -> Self {
        Self {
            run_id: run_id.into(),
            rmse_per_timestep: vec![f64::INFINITY; horizon],
            scores: Aggregate::DIVERGED,
        }
    }

    /// Flat `key=value` lines; the curve is one comma-separated value.
    pub fn to_key_value(&self) -> String {
        let mut out = format!("run_id={}\n", self.run_id);
        for (k, v) in self.scores.values() {
            out.push_str(&format!("{k}={v}\n"));
        }
        let curve: Vec<String> = self
            .rmse_per_timestep
            .iter()
            .map(|v| v.to_string())
            .collect();
        out.push_str(&format!("rmse_per_timestep={}\n", curve.join(",")));
        out
    }
}

#[derive(Serialize)]
struct RunRow<'a> {
    run_id: &'a str,
    rmse_avg: f64,
    mae: f64,
    medae: f64,
    nrmse: f64,
    auc: f64,
}

/// One CSV row per run.
pub fn write_runs_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let s = &r.scores;
        w.serialize(RunRow {
            run_id: &r.run_id,
            rmse_avg: s.rmse_avg,
            mae: s.mae,
            medae: s.medae,
            nrmse: s.nrmse,
            auc: s.auc,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Cross-run summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub median: f64,
    pub iqr: f64,
    pub mean: f64,
    pub ci95: f64,
}

pub fn summarize(reports: &[MetricsReport]) -> Vec<MetricSummary> {
    let names = Aggregate::DIVERGED.values().map(|(k, _)| k);
    names
        .iter()
        .enumerate()
        .map(|(i, &metric)| {
            let values: Vec<f64> = reports.iter().map(|r| r.scores.values()[i].1).collect();
            let (median, iqr) = median_iqr(&values);
            let (mean, ci95) = mean_ci95(&values);
            MetricSummary {
                metric,
                median,
                iqr,
                mean,
                ci95,
            }
        })
        .collect()
}

/// Per-step median, first and third quartile of the RMSE curves across runs.
pub fn curve_band(reports: &[MetricsReport]) -> Vec<(f64, f64, f64)> {
    let horizon = reports
        .iter()
        .map(|r| r.rmse_per_timestep.len())
        .min()
        .unwrap_or(0);
    (0..horizon)
        .map(|t| {
            let v = sorted_with_divergence(
                &reports
                    .iter()
                    .map(|r| r.rmse_per_timestep[t])
                    .collect::<Vec<_>>(),
            );
            (
                quantile_sorted(&v, 0.5),
                quantile_sorted(&v, 0.25),
                quantile_sorted(&v, 0.75),
            )
        })
        .collect()
}
