use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipeError;
use crate::negatives::NegativeCaption;

/// A negative attached to a record: bare text, or a generated negative with
/// its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Negative {
    Text(String),
    Generated(NegativeCaption),
}

impl Negative {
    pub fn text(&self) -> &str {
        match self {
            Negative::Text(t) => t,
            Negative::Generated(n) => &n.text,
        }
    }
}

/// One line of a JSONL shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    #[serde(default)]
    pub id: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_features: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negatives: Option<Vec<Negative>>,
}

impl CaptionRecord {
    pub fn new(id: impl Into<String>, caption: impl Into<String>) -> Self {
        CaptionRecord {
            id: id.into(),
            caption: caption.into(),
            image_features: None,
            negatives: None,
        }
    }

    pub fn negative_texts(&self) -> impl Iterator<Item = &str> {
        self.negatives.iter().flatten().map(Negative::text)
    }
}

/// Parses one shard line. Records without an id get `<file stem>:<line>`.
pub(crate) fn parse_record(
    path: &Path,
    line_no: usize,
    line: &str,
    feature_dim: Option<usize>,
) -> Result<CaptionRecord, PipeError> {
    let schema = |msg: String| PipeError::Schema {
        path: path.to_path_buf(),
        line: line_no,
        msg,
    };
    let mut record: CaptionRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
    if record.caption.trim().is_empty() {
        return Err(schema("empty caption".into()));
    }
    if let (Some(dim), Some(features)) = (feature_dim, &record.image_features) {
        if features.len() != dim {
            return Err(schema(format!(
                "image_features has length {}, expected {dim}",
                features.len()
            )));
        }
    }
    if record.id.is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
        record.id = format!("{stem}:{line_no}");
    }
    Ok(record)
}

fn open(path: &Path) -> Result<BufReader<File>, PipeError> {
    File::open(path).map(BufReader::new).map_err(|source| PipeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-blank lines of a shard with their 1-based line numbers.
pub(crate) fn shard_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String), PipeError>>, PipeError> {
    let owned = path.to_path_buf();
    Ok(open(path)?
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(source) => Some(Err(PipeError::Io {
                path: owned.clone(),
                source,
            })),
        }))
}

/// Reads every record of a shard.
pub fn read_shard(path: impl AsRef<Path>, feature_dim: Option<usize>) -> Result<Vec<CaptionRecord>, PipeError> {
    let path = path.as_ref();
    shard_lines(path)?
        .map(|item| item.and_then(|(n, line)| parse_record(path, n, &line, feature_dim)))
        .collect()
}

/// Writes records as JSONL.
pub fn write_jsonl<'r>(mut out: impl Write, records: impl IntoIterator<Item = &'r CaptionRecord>) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negatives_accept_strings_and_objects() {
        let line = r#"{"id":"a","caption":"a dog","negatives":["a cat",{"text":"no dog","strategy":"NEGATE","edits":[],"seed":3}]}"#;
        let r = parse_record(Path::new("s.jsonl"), 1, line, None).unwrap();
        assert_eq!(r.negative_texts().collect::<Vec<_>>(), ["a cat", "no dog"]);
    }

    #[test]
    fn default_id_and_schema_errors() {
        let r = parse_record(Path::new("dir/shard-3.jsonl"), 7, r#"{"caption":"x"}"#, None).unwrap();
        assert_eq!(r.id, "shard-3:7");
        let e = parse_record(Path::new("s.jsonl"), 2, r#"{"id":"x"}"#, None).unwrap_err();
        assert!(matches!(e, PipeError::Schema { line: 2, .. }));
        let e = parse_record(Path::new("s.jsonl"), 1, r#"{"caption":"x","image_features":[1,2]}"#, Some(3));
        assert!(e.is_err());
    }
}
