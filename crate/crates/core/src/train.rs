//! Pieces shared by the two trainable models: artifact directories,
//! training logs and seeded batch order.

use crate::nn::{read_params, write_params, Param, Scalar, StoreError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MODEL_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("artifact at {path} is a {found} model, expected {expected}")]
    WrongKind {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("weights in {path}: {source}")]
    Weights {
        path: PathBuf,
        #[source]
        source: StoreError,
    },
    #[error("weights in {0} do not match the recorded digest")]
    DigestMismatch(PathBuf),
}

impl ArtifactError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ArtifactError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    /// SGD with momentum.
    Sgd,
}

/// One line of `train_log.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_loss: f64,
    /// Task metric on the validation split when it was computed this epoch.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub val_metric: Option<f64>,
}

pub fn write_log(path: &Path, records: &[LogRecord]) -> Result<(), ArtifactError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("log record serialises"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| ArtifactError::io(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(|e| ArtifactError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| ArtifactError::Schema {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// SHA-256 of the canonical JSON form of a value.
pub fn fingerprint<C: Serialize>(value: &C) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    hex::encode(Sha256::digest(json))
}

/// Header written as `model.json` next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta<C> {
    pub kind: String,
    pub format_version: u32,
    pub config: C,
    /// Fingerprint of `config`.
    pub config_fingerprint: String,
    pub weights_sha256: String,
    pub num_params: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

pub(crate) fn save_model<C: Serialize>(
    dir: &Path,
    kind: &str,
    config: &C,
    params: &[&Param<f32>],
    extra: serde_json::Map<String, serde_json::Value>,
) -> Result<ModelMeta<C>, ArtifactError>
where
    C: Clone,
{
    fs::create_dir_all(dir).map_err(|e| ArtifactError::io(dir, e))?;
    let mut bytes = Vec::new();
    write_params(params, &mut bytes).map_err(|source| ArtifactError::Weights {
        path: dir.join(WEIGHTS_FILE),
        source,
    })?;
    let wpath = dir.join(WEIGHTS_FILE);
    fs::write(&wpath, &bytes).map_err(|e| ArtifactError::io(&wpath, e))?;
    let meta = ModelMeta {
        kind: kind.to_string(),
        format_version: 1,
        config: config.clone(),
        config_fingerprint: fingerprint(config),
        weights_sha256: hex::encode(Sha256::digest(&bytes)),
        num_params: params.iter().map(|p| p.len()).sum(),
        extra,
    };
    let mpath = dir.join(MODEL_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("model meta serialises") + "\n";
    fs::write(&mpath, text).map_err(|e| ArtifactError::io(&mpath, e))?;
    Ok(meta)
}

pub(crate) fn read_meta<C: DeserializeOwned>(dir: &Path, kind: &str) -> Result<ModelMeta<C>, ArtifactError> {
    let path = dir.join(MODEL_FILE);
    let file = fs::File::open(&path).map_err(|e| ArtifactError::io(&path, e))?;
    let meta: ModelMeta<C> = serde_json::from_reader(BufReader::new(file)).map_err(|e| ArtifactError::Schema {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if meta.kind != kind {
        return Err(ArtifactError::WrongKind {
            path,
            expected: kind.to_string(),
            found: meta.kind,
        });
    }
    Ok(meta)
}

pub(crate) fn load_weights<T: Scalar>(dir: &Path, digest: &str, params: Vec<&mut Param<T>>) -> Result<(), ArtifactError> {
    let path = dir.join(WEIGHTS_FILE);
    let bytes = fs::read(&path).map_err(|e| ArtifactError::io(&path, e))?;
    if hex::encode(Sha256::digest(&bytes)) != digest {
        return Err(ArtifactError::DigestMismatch(path));
    }
    read_params(params, bytes.as_slice()).map_err(|source| ArtifactError::Weights { path, source })
}

/// Sample order for one epoch, a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::dataset::sample_seed(seed, 0x7472_6169_6e, epoch as u64, 0));
    order.shuffle(&mut rng);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(LOG_FILE);
        let recs = vec![
            LogRecord {
                epoch: 1,
                loss: 0.5,
                val_loss: 0.6,
                val_metric: None,
            },
            LogRecord {
                epoch: 2,
                loss: 0.25,
                val_loss: 0.3,
                val_metric: Some(0.8),
            },
        ];
        write_log(&p, &recs).unwrap();
        assert_eq!(read_log(&p).unwrap(), recs);
    }

    #[test]
    fn epoch_order_is_a_seeded_permutation() {
        let a = epoch_order(50, 3, 1);
        assert_eq!(a, epoch_order(50, 3, 1));
        assert_ne!(a, epoch_order(50, 3, 2));
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
    }
}
