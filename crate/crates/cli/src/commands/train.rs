use std::path::PathBuf;

use nlbench_core::neural::{self, write_model};

use crate::args::TrainArgs;
use crate::error::{CliError, Result};
use crate::io::{create, ensure_dir, load_dataset, Overrides, Summary};

/// Writes `model.nlfm`, `history.csv` and `summary.json` under `--out`.
pub fn train(args: &TrainArgs) -> Result<PathBuf> {
    let overrides = Overrides::load(args.config.as_deref())?;
    let mut config = overrides.training.unwrap_or_default();
    if let Some(h) = args.hidden {
        config.hidden = h;
    }
    if let Some(e) = args.epochs {
        config.max_epochs = e;
    }
    if let Some(p) = args.patience {
        config.patience = p;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    if let Some(lr) = args.lr {
        config.learning_rate = lr;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let train_set = load_dataset(&args.train_set)?;
    let val_set = load_dataset(&args.val_set)?;
    let (model, history) = neural::train(&train_set, &val_set, &config)?;

    ensure_dir(&args.out)?;
    let model_path = args.out.join("model.nlfm");
    write_model(&model, &model_path).map_err(|source| CliError::Model {
        path: model_path.clone(),
        source,
    })?;
    history.write_csv(create(&args.out.join("history.csv"))?)?;

    let best = history
        .records
        .iter()
        .find(|r| r.epoch == history.best_epoch)
        .expect("best epoch is recorded");
    let mut s = Summary::default();
    s.text("scenario", model.scenario.name())
        .int("hidden", config.hidden as u64)
        .int("param_count", model.gru.param_count() as u64)
        .int("seed", config.seed)
        .int(
            "epochs_run",
            history.records.last().map_or(0, |r| r.epoch) as u64,
        )
        .int("best_epoch", history.best_epoch as u64)
        .num("best_val_loss", best.val_loss)
        .num("initial_val_loss", history.records[0].val_loss)
        .flag("stopped_early", history.stopped_early);
    s.write(&args.out.join("summary.json"))?;
    Ok(model_path)
}
