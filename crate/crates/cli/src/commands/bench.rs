use nlbench_core::bench::{
    measure_throughput, write_throughput_csv, BenchSettings, Estimator, ExecMode, ThroughputReport,
};
use nlbench_core::datasets::Role;
use nlbench_core::filters::Method;
use nlbench_core::neural::{Gru, GruShape, Normalizer, TrainConfig, TrainedModel};
use nlbench_core::rng::rng_from_seed;

use super::{build_set, check_model_fits, unique};
use crate::args::BenchArgs;
use crate::error::{CliError, Result};
use crate::io::{create, ensure_dir, load_model, require_scenario, Overrides, Summary};

/// Writes `throughput.csv` and `summary.json` with one row per method. The
/// no-op reference row comes first when all methods are timed or `--noop`
/// is set.
pub fn bench(args: &BenchArgs) -> Result<Vec<ThroughputReport>> {
    let kind = require_scenario(args.scenario)?;
    if args.n == 0 {
        return Err(CliError::invalid("--n must be at least 1"));
    }
    let overrides = Overrides::load(args.tuning.config.as_deref())?;
    let config = overrides.scenario_for(kind)?;
    let horizon = args.horizon.unwrap_or(args.warmup + args.iters);
    let set = build_set(&config, Role::Eval, Some(args.n), Some(horizon), args.seed)?;
    let model = set.config.build()?;
    let methods = unique(if args.method.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.method.clone()
    });

    let network = if methods.contains(&Method::Gru) {
        Some(match &args.model {
            Some(p) => {
                let m = load_model(p)?;
                check_model_fits(&m, set.config.name(), model.dim_x())?;
                m
            }
            // untrained weights cost exactly as much to run as trained ones
            None => {
                let dims = set.dims()?;
                let shape = GruShape {
                    input: dims.y + dims.u,
                    hidden: args.hidden,
                    output: dims.x,
                };
                TrainedModel {
                    scenario: set.config.clone(),
                    gru: Gru::new(shape, &mut rng_from_seed(args.seed)),
                    normalizer: Normalizer::fit(&set)?,
                    train_config: TrainConfig {
                        hidden: args.hidden,
                        ..TrainConfig::default()
                    },
                }
            }
        })
    } else {
        None
    };

    let settings = BenchSettings {
        warmup: args.warmup,
        iters: args.iters,
        mode: if args.parallel {
            ExecMode::Parallel
        } else {
            ExecMode::Serial
        },
        seed: args.seed,
    };
    let mut reports = Vec::new();
    if args.method.is_empty() || args.noop {
        reports.push(measure_throughput(
            &Estimator::Noop,
            model.as_ref(),
            &set.trajectories,
            &settings,
        )?);
    }
    for &method in &methods {
        let estimator = match method {
            Method::Gru => Estimator::Gru(network.as_ref().expect("built above")),
            _ => Estimator::Filter(overrides.filter_for(method, &args.tuning)?),
        };
        reports.push(measure_throughput(
            &estimator,
            model.as_ref(),
            &set.trajectories,
            &settings,
        )?);
    }

    ensure_dir(&args.out)?;
    write_throughput_csv(&reports, create(&args.out.join("throughput.csv"))?)?;
    let mut summary = Summary::default();
    summary
        .text("scenario", kind.as_str())
        .int("batch", args.n as u64)
        .int("warmup", args.warmup as u64)
        .int("iters", args.iters as u64)
        .text("mode", settings.mode.to_string());
    for r in &reports {
        summary.num(format!("{}.iter_per_sec", r.method), r.iter_per_sec);
    }
    summary.write(&args.out.join("summary.json"))?;
    Ok(reports)
}
