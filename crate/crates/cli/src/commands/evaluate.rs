use std::io::Write;
use std::path::{Path, PathBuf};

use nlbench_core::datasets::Dataset;
use nlbench_core::filters::Method;
use nlbench_core::metrics::{curve_band, summarize, MetricsReport};
use nlbench_core::neural::TrainedModel;

use super::{assumed_model, check_model_fits, run_seed, run_set, truths, unique, Estimator};
use crate::args::EvaluateArgs;
use crate::error::{CliError, Result};
use crate::io::{
    check_noise_scale, create, ensure_dir, fmt_f64, load_dataset, load_model, Overrides, Summary,
};

/// One scored run of one method.
#[derive(Debug, Clone)]
pub struct ScoredRun {
    pub method: Method,
    pub report: MetricsReport,
    pub diverged_trajectories: usize,
}

/// Methods to evaluate: the explicit list, or the classical filters plus
/// gru when models were given.
fn resolve_methods(requested: &[Method], have_models: bool) -> Result<Vec<Method>> {
    let methods: Vec<Method> = unique(if requested.is_empty() {
        let mut m = Method::CLASSICAL.to_vec();
        if have_models {
            m.push(Method::Gru);
        }
        m
    } else {
        requested.to_vec()
    });
    if methods.contains(&Method::Gru) && !have_models {
        return Err(CliError::invalid("--method gru needs at least one --model"));
    }
    Ok(methods)
}

fn score(
    method: Method,
    run_id: String,
    estimator: &Estimator,
    set: &Dataset,
    noise_scale: f64,
    seed: u64,
) -> Result<ScoredRun> {
    let model = set.config.build()?;
    let assumed = assumed_model(model.as_ref(), noise_scale);
    let run = run_set(estimator, &assumed, &set.trajectories, seed)?;
    let report = MetricsReport::from_run(run_id, &run.estimates, &truths(&set.trajectories))?;
    Ok(ScoredRun {
        method,
        report,
        diverged_trajectories: run.diverged,
    })
}

/// Writes `runs.csv`, `aggregate.csv`, `curve_<method>.csv` and `summary.json`.
///
/// Filters run once per evaluation set and init seed. Models are split into
/// equal consecutive groups, one group per evaluation set, and each model is
/// scored on its set; 3 sets with 5 seeds (or 5 models) each give 15 runs.
pub fn evaluate(args: &EvaluateArgs) -> Result<Vec<ScoredRun>> {
    check_noise_scale(args.noise_scale)?;
    if args.init_seeds == 0 {
        return Err(CliError::invalid("--init-seeds must be at least 1"));
    }
    let overrides = Overrides::load(args.tuning.config.as_deref())?;
    let methods = resolve_methods(&args.method, !args.model.is_empty())?;
    let sets = args
        .eval_sets
        .iter()
        .map(|p| load_dataset(p))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = sets.first() {
        if sets.iter().any(|s| s.config.name() != first.config.name()) {
            return Err(CliError::invalid(
                "evaluation sets come from different scenarios",
            ));
        }
    }
    let models: Vec<TrainedModel> = if methods.contains(&Method::Gru) {
        if !args.model.len().is_multiple_of(sets.len()) {
            return Err(CliError::invalid(format!(
                "{} models cannot be split evenly over {} evaluation sets",
                args.model.len(),
                sets.len()
            )));
        }
        args.model
            .iter()
            .map(|p| load_model(p))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let per_set = models.len() / sets.len();

    let mut runs = Vec::new();
    for &method in &methods {
        for (d, set) in sets.iter().enumerate() {
            if method == Method::Gru {
                for (k, m) in models[d * per_set..(d + 1) * per_set].iter().enumerate() {
                    let model = set.config.build()?;
                    check_model_fits(m, set.config.name(), model.dim_x())?;
                    let run_id = format!("d{d}-m{k}");
                    runs.push(score(method, run_id, &Estimator::Gru(m), set, 1.0, 0)?);
                }
            } else {
                let cfg = overrides.filter_for(method, &args.tuning)?;
                for s in 0..args.init_seeds {
                    let seed = run_seed(set.seed, args.seed, s as u64);
                    let run_id = format!("d{d}-s{s}");
                    runs.push(score(
                        method,
                        run_id,
                        &Estimator::Filter(cfg),
                        set,
                        args.noise_scale,
                        seed,
                    )?);
                }
            }
        }
    }

    ensure_dir(&args.out)?;
    write_runs(&args.out.join("runs.csv"), &runs)?;
    write_aggregate(&args.out, &methods, &runs, &sets[0])?;
    Ok(runs)
}

fn write_runs(path: &Path, runs: &[ScoredRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "method",
        "run_id",
        "diverged_trajectories",
        "rmse_avg",
        "mae",
        "medae",
        "nrmse",
        "auc",
    ])?;
    for r in runs {
        let mut row = vec![
            r.method.to_string(),
            r.report.run_id.clone(),
            r.diverged_trajectories.to_string(),
        ];
        row.extend(r.report.scores.values().iter().map(|(_, v)| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_aggregate(
    out: &Path,
    methods: &[Method],
    runs: &[ScoredRun],
    first: &Dataset,
) -> Result<()> {
    let agg_path = out.join("aggregate.csv");
    let mut agg = csv::Writer::from_writer(create(&agg_path)?);
    agg.write_record(["method", "metric", "median", "iqr", "mean", "ci95", "runs"])?;
    let mut summary = Summary::default();
    summary.text("scenario", first.config.name());
    for &method in methods {
        let reports: Vec<MetricsReport> = runs
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.report.clone())
            .collect();
        summary.int(format!("{method}.runs"), reports.len() as u64);
        for m in summarize(&reports) {
            agg.write_record([
                method.to_string(),
                m.metric.to_string(),
                fmt_f64(m.median),
                fmt_f64(m.iqr),
                fmt_f64(m.mean),
                fmt_f64(m.ci95),
                reports.len().to_string(),
            ])?;
            summary
                .num(format!("{method}.{}.median", m.metric), m.median)
                .num(format!("{method}.{}.iqr", m.metric), m.iqr)
                .num(format!("{method}.{}.mean", m.metric), m.mean)
                .num(format!("{method}.{}.ci95", m.metric), m.ci95);
        }

        let curve_path: PathBuf = out.join(format!("curve_{method}.csv"));
        let mut curve = create(&curve_path)?;
        let io_err = |e| CliError::io(&curve_path, e);
        writeln!(curve, "timestep,median_rmse,q1,q3").map_err(io_err)?;
        for (t, (median, q1, q3)) in curve_band(&reports).into_iter().enumerate() {
            writeln!(
                curve,
                "{t},{},{},{}",
                fmt_f64(median),
                fmt_f64(q1),
                fmt_f64(q3)
            )
            .map_err(io_err)?;
        }
        curve.flush().map_err(io_err)?;
    }
    agg.flush().map_err(|e| CliError::io(&agg_path, e))?;
    summary.write(&out.join("summary.json"))
}
