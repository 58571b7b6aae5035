//! Zero-shot classification with prompt ensembling, Recall@K retrieval and
//! caption-choice probes over any [`Encoder`].

mod metrics;
mod tasks;

use std::path::{Path, PathBuf};

use ndarray::{Array1, ArrayView1};

pub use metrics::{
    accuracy, argmax, choice_correct, choice_scores, paired_ranks, predict, rank_of, recall_at_k, recall_from_ranks,
    ChoiceScores, ClassMetric, Recall,
};
pub use tasks::{
    caption_choice, class_embedding, evaluate, evaluate_all, load_task, load_tasks, read_templates, retrieval_recall,
    zero_shot_classify, CaptionChoiceTask, ChoiceItem, ClassItem, ClassificationTask, Label, Report, RetrievalItem,
    RetrievalTask, Task, TaskDescriptor, TaskKind,
};

use crate::trainer::{TowerParams, TrainError, Vocab, MIN_NORM};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("template {0:?} must contain exactly one \"{{}}\" placeholder")]
    BadTemplate(String),
    #[error("embedding has (near) zero norm: {0}")]
    DegenerateEmbedding(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Model(#[from] TrainError),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Maps captions and image features to unit vectors in a shared space.
pub trait Encoder: Sync {
    fn embed_text(&self, caption: &str) -> Result<Array1<f64>, EvalError>;
    fn embed_image(&self, features: &[f32]) -> Result<Array1<f64>, EvalError>;
}

/// A trained two-tower model with its vocabulary. Encodes in double
/// precision.
#[derive(Debug, Clone)]
pub struct TowerModel {
    params: TowerParams<f64>,
    vocab: Vocab,
}

impl TowerModel {
    pub fn new(params: &TowerParams<f32>, vocab: Vocab) -> Result<Self, EvalError> {
        if vocab.len() > params.text_embedding.nrows() {
            return Err(EvalError::InvalidTask(format!(
                "vocabulary of {} words exceeds the model's {} embedding rows",
                vocab.len(),
                params.text_embedding.nrows()
            )));
        }
        Ok(TowerModel {
            params: params.cast(),
            vocab,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }
}

impl Encoder for TowerModel {
    fn embed_text(&self, caption: &str) -> Result<Array1<f64>, EvalError> {
        Ok(self.params.encode_text(&self.vocab.encode(caption))?)
    }

    fn embed_image(&self, features: &[f32]) -> Result<Array1<f64>, EvalError> {
        let x: Array1<f64> = features.iter().map(|&v| v as f64).collect();
        Ok(self.params.encode_image(x.view())?)
    }
}

/// `v / |v|`, or `DegenerateEmbedding` when the norm vanishes.
pub fn normalize(v: ArrayView1<f64>, what: &str) -> Result<Array1<f64>, EvalError> {
    let n = v.dot(&v).sqrt();
    if !(n >= MIN_NORM) {
        return Err(EvalError::DegenerateEmbedding(what.to_string()));
    }
    Ok(v.mapv(|x| x / n))
}
