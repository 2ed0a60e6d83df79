use std::path::PathBuf;

use nlbench_core::datasets::{
    generate_chunked_dataset, generate_dataset, write_dataset, Dataset, Role, DEFAULT_EVAL_COUNT,
    DEFAULT_TRAIN_COUNT, DEFAULT_TRAIN_HORIZON, DEFAULT_VAL_COUNT,
};
use nlbench_core::scenarios::ScenarioConfig;

use crate::args::GenerateArgs;
use crate::error::{CliError, Result};
use crate::io::{check_noise_scale, ensure_parent, require_scenario, Overrides};

/// Builds one set. Train and val sets are `horizon`-step chunks cut from
/// rollouts as long as the evaluation horizon; eval sets are full rollouts.
/// The seed is split per role, so one `seed` gives three disjoint sets.
pub fn build_set(
    config: &ScenarioConfig,
    role: Role,
    n: Option<usize>,
    horizon: Option<usize>,
    seed: u64,
) -> Result<Dataset> {
    let eval_horizon = config.kind().map_or(500, |k| k.default_eval_horizon());
    let role_seed = role.derive_seed(seed);
    let set = match role {
        Role::Train | Role::Val => {
            let default_n = if role == Role::Train {
                DEFAULT_TRAIN_COUNT
            } else {
                DEFAULT_VAL_COUNT
            };
            let chunk = horizon.unwrap_or(DEFAULT_TRAIN_HORIZON);
            generate_chunked_dataset(
                config,
                n.unwrap_or(default_n),
                chunk,
                eval_horizon,
                role_seed,
                role,
            )?
        }
        Role::Eval => generate_dataset(
            config,
            n.unwrap_or(DEFAULT_EVAL_COUNT),
            horizon.unwrap_or(eval_horizon),
            role_seed,
            role,
        )?,
    };
    Ok(set)
}

pub fn generate(args: &GenerateArgs) -> Result<Vec<PathBuf>> {
    let kind = require_scenario(args.scenario)?;
    check_noise_scale(args.noise_scale)?;
    let overrides = Overrides::load(args.config.as_deref())?;
    let config = overrides
        .scenario_for(kind)?
        .with_observation_noise_scale(args.noise_scale);

    let targets: Vec<(Role, PathBuf)> = match args.role {
        Some(role) => vec![(role, args.out.clone())],
        None => Role::ALL
            .into_iter()
            .map(|r| (r, args.out.join(format!("{r}.nlfb"))))
            .collect(),
    };
    let mut written = Vec::with_capacity(targets.len());
    for (role, path) in targets {
        let set = build_set(&config, role, args.n, args.horizon, args.seed)?;
        ensure_parent(&path)?;
        write_dataset(&set, &path).map_err(|source| CliError::Dataset {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
