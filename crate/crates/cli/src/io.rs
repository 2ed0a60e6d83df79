//! File helpers shared by the commands: inputs, overrides, CSV and JSON outputs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};

use nlbench_core::datasets::{read_dataset, Dataset};
use nlbench_core::filters::{FilterConfig, Method};
use nlbench_core::neural::{read_model, TrainConfig, TrainedModel};
use nlbench_core::scenarios::{ScenarioConfig, ScenarioKind};

use crate::args::TuningArgs;
use crate::error::{CliError, Result};

/// Contents of a `--config` file. Every entry is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub scenario: Option<ScenarioConfig>,
    pub filters: Vec<FilterConfig>,
    pub training: Option<TrainConfig>,
}

impl Overrides {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// The scenario config for `kind`, with overrides applied when they name
    /// the same scenario.
    pub fn scenario_for(&self, kind: ScenarioKind) -> Result<ScenarioConfig> {
        match &self.scenario {
            None => Ok(ScenarioConfig::default_for(kind)),
            Some(c) if c.kind() == Some(kind) => Ok(c.clone()),
            Some(c) => Err(CliError::invalid(format!(
                "config overrides scenario '{}' but --scenario is '{kind}'",
                c.name()
            ))),
        }
    }

    /// Filter settings for a classical method: defaults, then the config
    /// file, then `--np` / `--ensemble`.
    pub fn filter_for(&self, method: Method, tuning: &TuningArgs) -> Result<FilterConfig> {
        let mut cfg = method
            .default_filter()
            .ok_or_else(|| CliError::invalid(format!("{method} is not a classical filter")))?;
        if let Some(o) = self.filters.iter().find(|f| f.name() == method.as_str()) {
            cfg = *o;
        }
        match &mut cfg {
            FilterConfig::Pf(p) => {
                if let Some(np) = tuning.np {
                    p.particles = np;
                }
            }
            FilterConfig::Enkf(p) => {
                if let Some(m) = tuning.ensemble {
                    p.ensemble_size = m;
                }
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn require_scenario(kind: Option<ScenarioKind>) -> Result<ScenarioKind> {
    kind.ok_or_else(|| {
        CliError::invalid("--scenario is required (ballistic, bot, lorenz96, pendulum, quadrotor)")
    })
}

pub fn check_noise_scale(f: f64) -> Result<()> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(format!(
            "--noise-scale must be positive, got {f}"
        )))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(path).map_err(|source| CliError::Dataset {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    read_model(path).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip text; non-finite values print as `inf` / `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// Flat JSON object of scalar results. Non-finite numbers are written as
/// strings because JSON has no literal for them.
#[derive(Debug, Default)]
pub struct Summary(Map<String, Value>);

impl Summary {
    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) -> &mut Self {
        self.0.insert(key.into(), Value::String(v.into()));
        self
    }

    pub fn int(&mut self, key: impl Into<String>, v: u64) -> &mut Self {
        self.0.insert(key.into(), Value::from(v));
        self
    }

    pub fn flag(&mut self, key: impl Into<String>, v: bool) -> &mut Self {
        self.0.insert(key.into(), Value::Bool(v));
        self
    }

    pub fn num(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        let value = serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or_else(|| Value::String(fmt_f64(v)));
        self.0.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.0).expect("summary serializes");
        text.push('\n');
        ensure_parent(path)?;
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}
