//! Reproducible trajectory datasets and the `.nlfb` binary file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NLFB"            4 bytes
//! version           u32
//! metadata length   u32
//! metadata          UTF-8 JSON (scenario config, role, seed, dims, horizons, ...)
//! payload           f64 per value; per trajectory states ‖ observations ‖ controls
//! crc32             u32 over every preceding byte
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix, rng_from_seed, SimRng};
use crate::scenarios::{simulate_trajectory, ScenarioConfig, ScenarioError, Trajectory};

pub const MAGIC: &[u8; 4] = b"NLFB";
pub const FORMAT_VERSION: u32 = 1;

/// Desk-scale defaults.
pub const DEFAULT_TRAIN_COUNT: usize = 300;
pub const DEFAULT_VAL_COUNT: usize = 100;
pub const DEFAULT_EVAL_COUNT: usize = 100;
pub const DEFAULT_TRAIN_HORIZON: usize = 100;
/// Length of the long rollouts that training chunks are cut from.
pub const DEFAULT_SOURCE_HORIZON: usize = 500;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (wrong file type)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checksum mismatch (file truncated or corrupted)")]
    ChecksumMismatch,
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error("chunk length {chunk_len} exceeds source length {available}")]
    ChunkTooLong { chunk_len: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Val,
    Eval,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Train, Role::Val, Role::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Eval => "eval",
        }
    }

    /// Seed stream for this role, so one user seed yields disjoint
    /// train, validation and evaluation trajectories.
    pub fn derive_seed(self, seed: u64) -> u64 {
        let index = match self {
            Role::Train => 0,
            Role::Val => 1,
            Role::Eval => 2,
        };
        mix(seed, 0x5EED_0000 + index)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| DatasetError::InvalidArgument(format!("unknown role '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Materialized scenario config (includes the quadrotor `C`).
    pub config: ScenarioConfig,
    pub role: Role,
    pub seed: u64,
    pub created_unix: u64,
    pub format_version: u32,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub x: usize,
    pub u: usize,
    pub y: usize,
}

impl Dims {
    pub fn of(config: &ScenarioConfig) -> Result<Self> {
        let model = config.build()?;
        Ok(Self {
            x: model.dim_x(),
            u: model.dim_u(),
            y: model.dim_y(),
        })
    }
}

impl Dataset {
    /// Builds a dataset, checking every trajectory against the scenario dimensions.
    pub fn new(
        config: ScenarioConfig,
        role: Role,
        seed: u64,
        trajectories: Vec<Trajectory>,
    ) -> Result<Self> {
        let config = config.materialize();
        let dims = Dims::of(&config)?;
        for t in &trajectories {
            t.validate(dims.x, dims.u, dims.y)?;
        }
        Ok(Self {
            config,
            role,
            seed,
            created_unix: creation_time(),
            format_version: FORMAT_VERSION,
            trajectories,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn dims(&self) -> Result<Dims> {
        Dims::of(&self.config)
    }

    /// Common horizon, if every trajectory has the same one.
    pub fn horizon(&self) -> Option<usize> {
        let h = self.trajectories.first()?.horizon();
        self.trajectories
            .iter()
            .all(|t| t.horizon() == h)
            .then_some(h)
    }
}

/// Generation timestamp. Taken from `SOURCE_DATE_EPOCH` when set and 0
/// otherwise, so identical runs write identical files.
fn creation_time() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Simulates `n_traj` independent rollouts; trajectory `i` uses seed `mix(seed, i)`.
///
/// Runs in parallel on the current rayon pool; the result does not depend on
/// the number of workers.
pub fn generate_dataset(
    config: &ScenarioConfig,
    n_traj: usize,
    horizon: usize,
    seed: u64,
    role: Role,
) -> Result<Dataset> {
    if n_traj == 0 {
        return Err(DatasetError::InvalidArgument(
            "n_traj must be at least 1".into(),
        ));
    }
    if horizon == 0 {
        return Err(DatasetError::InvalidArgument(
            "horizon must be at least 1".into(),
        ));
    }
    let config = config.materialize();
    let model = config.build()?;
    let trajectories = (0..n_traj)
        .into_par_iter()
        .map(|i| simulate_trajectory(model.as_ref(), horizon, mix(seed, i as u64)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Dataset::new(config, role, seed, trajectories)
}

/// Draws `(source index, start)` pairs: source uniform over `lengths`, start
/// uniform on `[0, L_source − chunk_len]`.
fn sample_chunk_positions(
    rng: &mut SimRng,
    lengths: &[usize],
    chunk_len: usize,
    n_chunks: usize,
) -> Vec<(usize, usize)> {
    (0..n_chunks)
        .map(|_| {
            let src = rng.random_range(0..lengths.len());
            let start = rng.random_range(0..=lengths[src] - chunk_len);
            (src, start)
        })
        .collect()
}

/// Cuts `n_chunks` random contiguous windows of `chunk_len` transitions out
/// of the source trajectories.
pub fn chunk_trajectories(
    source: &Dataset,
    chunk_len: usize,
    n_chunks: usize,
    seed: u64,
) -> Result<Dataset> {
    if source.is_empty() || n_chunks == 0 || chunk_len == 0 {
        return Err(DatasetError::InvalidArgument(
            "chunking needs a non-empty source, n_chunks ≥ 1 and chunk_len ≥ 1".into(),
        ));
    }
    let lengths: Vec<usize> = source.trajectories.iter().map(|t| t.horizon()).collect();
    let shortest = *lengths.iter().min().expect("non-empty");
    if chunk_len > shortest {
        return Err(DatasetError::ChunkTooLong {
            chunk_len,
            available: shortest,
        });
    }
    let mut rng = rng_from_seed(seed);
    let chunks = sample_chunk_positions(&mut rng, &lengths, chunk_len, n_chunks)
        .into_iter()
        .map(|(src, start)| source.trajectories[src].window(start, chunk_len))
        .collect();
    Ok(Dataset {
        config: source.config.clone(),
        role: source.role,
        seed,
        created_unix: source.created_unix,
        format_version: FORMAT_VERSION,
        trajectories: chunks,
    })
}

/// Training-style dataset: long rollouts of `source_len` steps cut into
/// `n_chunks` random windows of `chunk_len`. Uses enough sources to cover
/// each roughly once.
pub fn generate_chunked_dataset(
    config: &ScenarioConfig,
    n_chunks: usize,
    chunk_len: usize,
    source_len: usize,
    seed: u64,
    role: Role,
) -> Result<Dataset> {
    let source_len = source_len.max(chunk_len);
    let n_sources = (n_chunks * chunk_len).div_ceil(source_len).max(1);
    let sources = generate_dataset(config, n_sources, source_len, seed, role)?;
    let mut out = chunk_trajectories(&sources, chunk_len, n_chunks, mix(seed, u64::MAX))?;
    out.seed = seed;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    config: ScenarioConfig,
    role: Role,
    seed: u64,
    created_unix: u64,
    n_trajectories: usize,
    dim_x: usize,
    dim_u: usize,
    dim_y: usize,
    horizons: Vec<usize>,
    trajectory_seeds: Vec<u64>,
}

/// Serializes `dataset` into the NLFB byte layout.
pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let dims = dataset.dims()?;
    let meta = Metadata {
        format_version: dataset.format_version,
        config: dataset.config.clone(),
        role: dataset.role,
        seed: dataset.seed,
        created_unix: dataset.created_unix,
        n_trajectories: dataset.len(),
        dim_x: dims.x,
        dim_u: dims.u,
        dim_y: dims.y,
        horizons: dataset.trajectories.iter().map(|t| t.horizon()).collect(),
        trajectory_seeds: dataset.trajectories.iter().map(|t| t.seed).collect(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| DatasetError::Malformed(e.to_string()))?;
    let meta_len = u32::try_from(json.len())
        .map_err(|_| DatasetError::InvalidArgument("metadata too large".into()))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&dataset.format_version.to_le_bytes());
    buf.extend_from_slice(&meta_len.to_le_bytes());
    buf.extend_from_slice(&json);
    for t in &dataset.trajectories {
        for v in t
            .states
            .iter()
            .chain(&t.observations)
            .chain(&t.controls)
            .flatten()
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

/// Reads a little-endian u32 at `at`.
fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

/// Checks magic and CRC trailer; returns the version and the body without trailer.
pub(crate) fn check_envelope<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(u32, &'a [u8])> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(DatasetError::BadMagic);
    }
    if bytes.len() < 16 {
        return Err(DatasetError::ChecksumMismatch);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(DatasetError::ChecksumMismatch);
    }
    let version = read_u32(body, 4).expect("length checked");
    Ok((version, body))
}

/// Parses bytes produced by [`encode_dataset`].
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let (version, body) = check_envelope(bytes, MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let meta_len = read_u32(body, 8).expect("length checked") as usize;
    let json = body
        .get(12..12 + meta_len)
        .ok_or_else(|| DatasetError::Malformed("metadata overruns file".into()))?;
    let meta: Metadata =
        serde_json::from_slice(json).map_err(|e| DatasetError::Malformed(e.to_string()))?;
    if meta.horizons.len() != meta.n_trajectories
        || meta.trajectory_seeds.len() != meta.n_trajectories
    {
        return Err(DatasetError::Malformed(
            "per-trajectory metadata count".into(),
        ));
    }

    let payload = &body[12 + meta_len..];
    let expected: usize = meta
        .horizons
        .iter()
        .map(|&t| (t + 1) * meta.dim_x + t * (meta.dim_y + meta.dim_u))
        .sum();
    if payload.len() != expected * 8 {
        return Err(DatasetError::Malformed(format!(
            "payload holds {} bytes, metadata implies {}",
            payload.len(),
            expected * 8
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |count: usize, dim: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| values.by_ref().take(dim).collect())
            .collect()
    };
    let name = meta.config.name().to_string();
    let trajectories = meta
        .horizons
        .iter()
        .zip(&meta.trajectory_seeds)
        .map(|(&t, &seed)| Trajectory {
            scenario: name.clone(),
            seed,
            states: take(t + 1, meta.dim_x),
            observations: take(t, meta.dim_y),
            controls: take(t, meta.dim_u),
        })
        .collect();

    let dataset = Dataset {
        config: meta.config,
        role: meta.role,
        seed: meta.seed,
        created_unix: meta.created_unix,
        format_version: meta.format_version,
        trajectories,
    };
    let dims = dataset.dims()?;
    if (dims.x, dims.u, dims.y) != (meta.dim_x, meta.dim_u, meta.dim_y) {
        return Err(DatasetError::Malformed(
            "dimensions disagree with the scenario config".into(),
        ));
    }
    Ok(dataset)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_dataset(dataset)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}
