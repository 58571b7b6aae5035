//! Two-tower contrastive model with analytic gradients: text and image
//! encoders, symmetric InfoNCE with appended hard negatives, AdamW and a
//! warmup plus cosine learning-rate schedule.

mod encode;
mod gradcheck;
mod loss;
mod optim;
mod params;
mod train;
mod vocab;

use std::path::{Path, PathBuf};

pub use encode::{ImageForward, TextForward, MIN_NORM};
pub use gradcheck::{gradient_check, random_batch, GradCheckReport, REL_FLOOR};
pub use loss::{info_nce, InfoNce};
pub use optim::{lr_at, AdamW};
pub use params::{Dense, ModelConfig, Scalar, TowerParams, LOG_TEMPERATURE, MAX_LOGIT_SCALE};
pub use train::{batch_gradients, batch_loss, train, write_metrics_csv, Batch, StepStats, TrainConfig, TrainExample, Trainer};
pub use vocab::{Vocab, PAD, UNK};

use crate::patcher::{Checkpoint, PatchError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("token id {token} is outside a vocabulary of {vocab}")]
    TokenOutOfRange { token: u32, vocab: usize },
    #[error("expected {expected} image features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a batch needs at least 2 pairs, got {0}")]
    DegenerateBatch(usize),
    #[error("embedding has (near) zero norm: {0}")]
    DegenerateEmbedding(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("data error: {0}")]
    Data(String),
}

impl TrainError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<PatchError> for TrainError {
    fn from(e: PatchError) -> Self {
        match e {
            PatchError::Io { path, source } => TrainError::Io { path, source },
            other => TrainError::Format(other.to_string()),
        }
    }
}

/// Writes parameters as a checkpoint archive.
pub fn save_checkpoint(params: &TowerParams<f32>, path: &Path) -> Result<crate::patcher::Digest, TrainError> {
    Ok(params.to_checkpoint().save(path)?)
}

/// Reads a checkpoint archive, checking shapes against `expected` if given.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<TowerParams<f32>, TrainError> {
    let ckpt = Checkpoint::load(path)?;
    TowerParams::from_checkpoint(&ckpt, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_file_round_trip() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("m.clvt");
        let config = ModelConfig::default();
        let p = TowerParams::<f32>::init(&config, 2).unwrap();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path, Some(&config)).unwrap(), p);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(TrainError::Format(_))));
    }
}
