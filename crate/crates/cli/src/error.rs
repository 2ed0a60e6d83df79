use std::path::PathBuf;

use thiserror::Error;

use nlbench_core::bench::BenchError;
use nlbench_core::datasets::DatasetError;
use nlbench_core::filters::FilterError;
use nlbench_core::metrics::MetricsError;
use nlbench_core::neural::NeuralError;
use nlbench_core::scenarios::ScenarioError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dataset {
        path: PathBuf,
        #[source]
        source: DatasetError,
    },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: NeuralError,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Generate(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// The message on one line, for stderr.
    pub fn one_line(&self) -> String {
        self.to_string()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
