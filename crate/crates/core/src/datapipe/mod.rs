//! JSONL caption shards: counting, sampling with replacement, dataset
//! combination and negative attachment.

mod attach;
mod record;
mod shards;

use std::path::PathBuf;

pub use attach::{attach_negatives, attach_negatives_batch, NegativeAttacher};
pub use record::{read_shard, write_jsonl, CaptionRecord, Negative};
pub use shards::{
    combine, open_shards, sample_stream, spawn_sampler, Combination, ShardInfo, ShardOptions, ShardSet,
    DEFAULT_CACHE_SHARDS, DEFAULT_MAX_RECORDS,
};

#[derive(Debug, thiserror::Error)]
pub enum PipeError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Schema { path: PathBuf, line: usize, msg: String },
    #[error("{}: {records} records exceeds the shard limit of {max}", path.display())]
    OversizeShard { path: PathBuf, records: usize, max: usize },
    #[error("{}: shard has no records", .0.display())]
    EmptyShard(PathBuf),
    #[error("{}: record count changed since the shard was opened", .0.display())]
    ShardChanged(PathBuf),
    #[error("no shards to sample from")]
    EmptySet,
    #[error("bad shard pattern {pattern:?}: {msg}")]
    Pattern { pattern: String, msg: String },
}

/// Expands glob patterns into a sorted, deduplicated list of files.
pub fn expand_globs<S: AsRef<str>>(patterns: &[S]) -> Result<Vec<PathBuf>, PipeError> {
    let mut out = Vec::new();
    for pattern in patterns {
        let pattern = pattern.as_ref();
        let bad = |msg: String| PipeError::Pattern {
            pattern: pattern.to_string(),
            msg,
        };
        let paths = glob::glob(pattern).map_err(|e| bad(e.to_string()))?;
        for path in paths {
            out.push(path.map_err(|e| bad(e.to_string()))?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn globs_sorted() {
        let dir = tempfile::TempDir::new().unwrap();
        for name in ["b.jsonl", "a.jsonl", "c.txt"] {
            std::fs::write(dir.path().join(name), "").unwrap();
        }
        let pattern = format!("{}/*.jsonl", dir.path().display());
        let got = expand_globs(&[pattern.as_str(), pattern.as_str()]).unwrap();
        let names: Vec<_> = got.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["a.jsonl", "b.jsonl"]);
    }
}
