use nlbench_core::datasets::Role;
use nlbench_core::filters::Method;
use nlbench_core::metrics::{aggregate, observed_snr_db};

use super::{build_set, check_model_fits, run_seed, run_set, truths, unique, Estimator};
use crate::args::SweepArgs;
use crate::error::{CliError, Result};
use crate::io::{
    check_noise_scale, create, ensure_dir, fmt_f64, load_model, require_scenario, Overrides,
    Summary,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub factor: f64,
    pub snr_db: f64,
    pub method: Method,
    pub rmse_avg: f64,
    pub diverged_trajectories: usize,
}

/// Regenerates the evaluation set at each observation-noise factor and
/// scores every method on it. Filters are built from the scaled config, so
/// they know the new `R`; the network is used as trained.
///
/// The set at factor 1 and the filter seeds equal those of
/// `generate --role eval` and `evaluate` (init seed 0) with the same seeds,
/// so that row reproduces the evaluation numbers.
pub fn sweep_noise(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let kind = require_scenario(args.scenario)?;
    if args.factors.is_empty() {
        return Err(CliError::invalid("--factors needs at least one value"));
    }
    for f in &args.factors {
        check_noise_scale(*f)?;
    }
    let overrides = Overrides::load(args.tuning.config.as_deref())?;
    let base = overrides.scenario_for(kind)?;
    let trained = args.model.as_deref().map(load_model).transpose()?;
    let methods: Vec<Method> = unique(if args.method.is_empty() {
        let mut m = Method::CLASSICAL.to_vec();
        if trained.is_some() {
            m.push(Method::Gru);
        }
        m
    } else {
        args.method.clone()
    });

    let mut rows = Vec::new();
    for &factor in &args.factors {
        let config = base.with_observation_noise_scale(factor);
        let set = build_set(&config, Role::Eval, Some(args.n), args.horizon, args.seed)?;
        let model = set.config.build()?;
        let snr_db = observed_snr_db(model.as_ref(), &set.trajectories)?;
        let truth = truths(&set.trajectories);
        for &method in &methods {
            let estimator = match method {
                Method::Gru => {
                    let m = trained
                        .as_ref()
                        .ok_or_else(|| CliError::invalid("--method gru needs --model"))?;
                    check_model_fits(m, set.config.name(), model.dim_x())?;
                    Estimator::Gru(m)
                }
                _ => Estimator::Filter(overrides.filter_for(method, &args.tuning)?),
            };
            let run = run_set(
                &estimator,
                model.as_ref(),
                &set.trajectories,
                run_seed(set.seed, 0, 0),
            )?;
            rows.push(SweepRow {
                factor,
                snr_db,
                method,
                rmse_avg: aggregate(&run.estimates, &truth)?.rmse_avg,
                diverged_trajectories: run.diverged,
            });
        }
    }

    ensure_dir(&args.out)?;
    let path = args.out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record([
        "noise_factor",
        "snr_db",
        "method",
        "rmse_avg",
        "diverged_trajectories",
    ])?;
    let mut summary = Summary::default();
    summary.text("scenario", kind.as_str());
    for r in &rows {
        w.write_record([
            fmt_f64(r.factor),
            fmt_f64(r.snr_db),
            r.method.to_string(),
            fmt_f64(r.rmse_avg),
            r.diverged_trajectories.to_string(),
        ])?;
        summary
            .num(format!("snr_db.x{}", r.factor), r.snr_db)
            .num(format!("{}.x{}.rmse_avg", r.method, r.factor), r.rmse_avg);
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    summary.write(&args.out.join("summary.json"))?;
    Ok(rows)
}
