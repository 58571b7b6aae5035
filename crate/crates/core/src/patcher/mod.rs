//! Weight-space interpolation between a pre-trained and a fine-tuned
//! checkpoint, and the α sweep over it.

mod checkpoint;
mod sweep;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, Digest, Tensor};
pub use sweep::{default_alphas, sweep, write_sweep_csv, SweepResult, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("tensor names differ: only in first {only_first:?}, only in second {only_second:?}")]
    NameSetMismatch {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },
    #[error("tensor {name:?}: shape {first:?} vs {second:?}")]
    ShapeMismatch {
        name: String,
        first: Vec<usize>,
        second: Vec<usize>,
    },
    #[error("alpha {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("evaluation failed: {0}")]
    Eval(String),
}

impl PatchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PatchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// What went into a patched checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchInfo {
    pub alpha: f64,
    pub pt: Digest,
    pub ft: Digest,
}

/// Checks that two checkpoints have the same names and shapes.
pub fn check_compatible(a: &Checkpoint, b: &Checkpoint) -> Result<(), PatchError> {
    let only_first: Vec<String> = a.names().filter(|n| b.get(n).is_none()).map(String::from).collect();
    let only_second: Vec<String> = b.names().filter(|n| a.get(n).is_none()).map(String::from).collect();
    if !only_first.is_empty() || !only_second.is_empty() {
        return Err(PatchError::NameSetMismatch { only_first, only_second });
    }
    for (name, ta) in a.iter() {
        let tb = b.get(name).expect("same names");
        if ta.shape != tb.shape {
            return Err(PatchError::ShapeMismatch {
                name: name.to_string(),
                first: ta.shape.clone(),
                second: tb.shape.clone(),
            });
        }
    }
    Ok(())
}

/// `(1 − α)·pt + α·ft` for every element, accumulated in f64 and stored as
/// f32. The endpoints return exact copies of the inputs.
pub fn patch(pt: &Checkpoint, ft: &Checkpoint, alpha: f64) -> Result<Checkpoint, PatchError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PatchError::AlphaOutOfRange(alpha));
    }
    check_compatible(pt, ft)?;
    if alpha == 0.0 {
        return Ok(pt.clone());
    }
    if alpha == 1.0 {
        return Ok(ft.clone());
    }
    let keep = 1.0 - alpha;
    let pairs: Vec<(&str, &Tensor)> = pt.iter().collect();
    let mixed: Vec<(String, Tensor)> = pairs
        .par_iter()
        .map(|(name, a)| {
            let b = ft.get(name).expect("checked names");
            let data = a
                .data
                .iter()
                .zip(&b.data)
                .map(|(&x, &y)| (keep * x as f64 + alpha * y as f64) as f32)
                .collect();
            (name.to_string(), Tensor { shape: a.shape.clone(), data })
        })
        .collect();
    let mut out = Checkpoint::new();
    for (name, t) in mixed {
        out.insert(name, t);
    }
    Ok(out)
}

/// [`patch`] plus the digests of its inputs.
pub fn patch_with_info(pt: &Checkpoint, ft: &Checkpoint, alpha: f64) -> Result<(Checkpoint, PatchInfo), PatchError> {
    let out = patch(pt, ft, alpha)?;
    let info = PatchInfo {
        alpha,
        pt: pt.digest(),
        ft: ft.digest(),
    };
    Ok((out, info))
}
