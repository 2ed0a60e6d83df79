use std::io::Write;
use std::path::PathBuf;

use nlbench_core::filters::Method;
use nlbench_core::metrics::aggregate;

use super::{assumed_model, check_model_fits, run_set, truths, Estimator};
use crate::args::FilterArgs;
use crate::error::{CliError, Result};
use crate::io::{
    check_noise_scale, create, ensure_dir, fmt_f64, load_dataset, load_model, Overrides, Summary,
};

/// Writes `estimates.csv` (one row per trajectory step) and `summary.json`.
pub fn filter(args: &FilterArgs) -> Result<PathBuf> {
    check_noise_scale(args.noise_scale)?;
    let overrides = Overrides::load(args.tuning.config.as_deref())?;
    let dataset = load_dataset(&args.dataset)?;
    let model = dataset.config.build()?;
    let assumed = assumed_model(model.as_ref(), args.noise_scale);

    let trained;
    let estimator = if args.method == Method::Gru {
        let path = args
            .model
            .as_deref()
            .ok_or_else(|| CliError::invalid("--method gru needs --model"))?;
        trained = load_model(path)?;
        check_model_fits(&trained, dataset.config.name(), model.dim_x())?;
        Estimator::Gru(&trained)
    } else {
        Estimator::Filter(overrides.filter_for(args.method, &args.tuning)?)
    };
    let run = run_set(&estimator, &assumed, &dataset.trajectories, args.seed)?;

    ensure_dir(&args.out)?;
    let path = args.out.join("estimates.csv");
    let mut w = create(&path)?;
    let header: Vec<String> = ["trajectory".to_string(), "t".to_string()]
        .into_iter()
        .chain((0..model.dim_x()).map(|k| format!("x{k}")))
        .collect();
    let io_err = |e| CliError::io(&path, e);
    writeln!(w, "{}", header.join(",")).map_err(io_err)?;
    for (i, traj) in run.estimates.iter().enumerate() {
        for (t, x) in traj.iter().enumerate() {
            let row: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{i},{t},{}", row.join(",")).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;

    let scores = aggregate(&run.estimates, &truths(&dataset.trajectories))?;
    let mut s = Summary::default();
    s.text("scenario", dataset.config.name())
        .text("method", args.method.as_str())
        .int("trajectories", dataset.len() as u64)
        .int("horizon", dataset.horizon().unwrap_or(0) as u64)
        .int("diverged_trajectories", run.diverged as u64);
    for (k, v) in scores.values() {
        s.num(k, v);
    }
    s.write(&args.out.join("summary.json"))?;
    Ok(path)
}
