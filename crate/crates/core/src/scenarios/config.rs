use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    BallisticConfig, BallisticModel, BotConfig, BotModel, LinearConfig, LinearModel,
    Lorenz96Config, Lorenz96Model, PendulumConfig, PendulumModel, QuadrotorConfig, QuadrotorModel,
    Result, ScenarioError, StateSpaceModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Ballistic,
    Bot,
    Lorenz96,
    Pendulum,
    Quadrotor,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Ballistic,
        ScenarioKind::Bot,
        ScenarioKind::Lorenz96,
        ScenarioKind::Pendulum,
        ScenarioKind::Quadrotor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Ballistic => "ballistic",
            ScenarioKind::Bot => "bot",
            ScenarioKind::Lorenz96 => "lorenz96",
            ScenarioKind::Pendulum => "pendulum",
            ScenarioKind::Quadrotor => "quadrotor",
        }
    }

    /// Evaluation horizon: 500 steps, except 200 for the free-falling quadrotor.
    pub fn default_eval_horizon(self) -> usize {
        match self {
            ScenarioKind::Quadrotor => 200,
            _ => 500,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ScenarioError::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// Serializable description of one scenario with all of its constants.
///
/// Serialized as a flat JSON object tagged by `"scenario"`; omitted fields
/// take their defaults, so an override document only lists what changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Ballistic(BallisticConfig),
    Bot(BotConfig),
    Lorenz96(Lorenz96Config),
    Pendulum(PendulumConfig),
    Quadrotor(QuadrotorConfig),
    Linear(LinearConfig),
}

impl ScenarioConfig {
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Ballistic => ScenarioConfig::Ballistic(Default::default()),
            ScenarioKind::Bot => ScenarioConfig::Bot(Default::default()),
            ScenarioKind::Lorenz96 => ScenarioConfig::Lorenz96(Default::default()),
            ScenarioKind::Pendulum => ScenarioConfig::Pendulum(Default::default()),
            ScenarioKind::Quadrotor => ScenarioConfig::Quadrotor(Default::default()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Ballistic(_) => "ballistic",
            ScenarioConfig::Bot(_) => "bot",
            ScenarioConfig::Lorenz96(_) => "lorenz96",
            ScenarioConfig::Pendulum(_) => "pendulum",
            ScenarioConfig::Quadrotor(_) => "quadrotor",
            ScenarioConfig::Linear(_) => "linear",
        }
    }

    pub fn kind(&self) -> Option<ScenarioKind> {
        self.name().parse().ok()
    }

    pub fn build(&self) -> Result<Box<dyn StateSpaceModel>> {
        Ok(match self {
            ScenarioConfig::Ballistic(c) => Box::new(BallisticModel::new(c.clone())?),
            ScenarioConfig::Bot(c) => Box::new(BotModel::new(c.clone())?),
            ScenarioConfig::Lorenz96(c) => Box::new(Lorenz96Model::new(c.clone())?),
            ScenarioConfig::Pendulum(c) => Box::new(PendulumModel::new(c.clone())?),
            ScenarioConfig::Quadrotor(c) => Box::new(QuadrotorModel::new(c.clone())?),
            ScenarioConfig::Linear(c) => Box::new(LinearModel::new(c.clone())?),
        })
    }

    /// Fills in derived constants (the quadrotor `C` matrix) so the config
    /// fully determines the model when stored alongside data.
    pub fn materialize(&self) -> Self {
        match self {
            ScenarioConfig::Quadrotor(c) => ScenarioConfig::Quadrotor(c.materialize()),
            other => other.clone(),
        }
    }

    /// Multiplies the observation-noise standard deviation by `factor`.
    pub fn with_observation_noise_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ScenarioConfig::Ballistic(c) => c.range_std *= factor,
            ScenarioConfig::Bot(c) => c.bearing_std *= factor,
            ScenarioConfig::Lorenz96(c) => c.obs_std *= factor,
            ScenarioConfig::Pendulum(c) => c.obs_std *= factor,
            ScenarioConfig::Quadrotor(c) => c.obs_std *= factor,
            ScenarioConfig::Linear(c) => c.r = c.r.scale(factor * factor),
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| ScenarioError::InvalidArgument(format!("scenario config: {e}")))
    }
}
