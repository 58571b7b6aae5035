use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread;

use lru::LruCache;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{parse_record, read_shard, shard_lines};
use super::{CaptionRecord, PipeError};

/// Largest shard accepted by default.
pub const DEFAULT_MAX_RECORDS: usize = 10_000;
/// Shards kept parsed in memory while sampling.
pub const DEFAULT_CACHE_SHARDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    Single,
    /// One pool; shards drawn in proportion to their size.
    Concatenate,
    /// Pick a source dataset uniformly, then sample within it.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardInfo {
    pub path: PathBuf,
    pub records: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ShardOptions {
    pub max_records: usize,
    /// Expected `image_features` length, checked when present.
    pub feature_dim: Option<usize>,
}

impl Default for ShardOptions {
    fn default() -> Self {
        ShardOptions {
            max_records: DEFAULT_MAX_RECORDS,
            feature_dim: None,
        }
    }
}

/// Shards plus the rule for drawing from them. `groups` partitions the shard
/// indices into source datasets; only [`Combination::Uniform`] has more than
/// one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSet {
    pub shards: Vec<ShardInfo>,
    pub groups: Vec<Vec<usize>>,
    pub combination: Combination,
    pub feature_dim: Option<usize>,
}

/// Counts and validates shards. Only the first record of each shard is
/// parsed here; the rest are checked when the shard is loaded.
pub fn open_shards<P: AsRef<Path>>(paths: &[P], options: ShardOptions) -> Result<ShardSet, PipeError> {
    let mut shards = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let mut records = 0;
        for item in shard_lines(path)? {
            let (line_no, line) = item?;
            if records == 0 {
                parse_record(path, line_no, &line, options.feature_dim)?;
            }
            records += 1;
        }
        if records == 0 {
            return Err(PipeError::EmptyShard(path.to_path_buf()));
        }
        if records > options.max_records {
            return Err(PipeError::OversizeShard {
                path: path.to_path_buf(),
                records,
                max: options.max_records,
            });
        }
        shards.push(ShardInfo {
            path: path.to_path_buf(),
            records,
        });
    }
    if shards.is_empty() {
        return Err(PipeError::EmptySet);
    }
    Ok(ShardSet {
        groups: vec![(0..shards.len()).collect()],
        shards,
        combination: Combination::Single,
        feature_dim: options.feature_dim,
    })
}

/// Merges datasets. One input is returned unchanged. Any grouping inside an
/// input is flattened: each input set becomes one source.
pub fn combine(sets: Vec<ShardSet>, mode: Combination) -> Result<ShardSet, PipeError> {
    let mut sets = sets;
    match sets.len() {
        0 => return Err(PipeError::EmptySet),
        1 => return Ok(sets.pop().expect("one set")),
        _ => {}
    }
    let feature_dim = sets[0].feature_dim;
    let mut shards = Vec::new();
    let mut groups = Vec::new();
    for set in sets {
        let base = shards.len();
        groups.push((base..base + set.shards.len()).collect::<Vec<_>>());
        shards.extend(set.shards);
    }
    let (groups, combination) = match mode {
        Combination::Uniform => (groups, Combination::Uniform),
        Combination::Single | Combination::Concatenate => {
            (vec![(0..shards.len()).collect()], Combination::Concatenate)
        }
    };
    Ok(ShardSet {
        shards,
        groups,
        combination,
        feature_dim,
    })
}

impl ShardSet {
    pub fn total_records(&self) -> usize {
        self.shards.iter().map(|s| s.records).sum()
    }

    /// Endless `(shard, record)` draws with replacement: a group uniformly,
    /// then a shard in proportion to its size, then a record uniformly.
    pub fn draws(&self, seed: u64) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pickers: Vec<WeightedIndex<u64>> = self
            .groups
            .iter()
            .map(|g| WeightedIndex::new(g.iter().map(|&s| self.shards[s].records as u64)).expect("non-empty group"))
            .collect();
        std::iter::repeat_with(move || {
            let g = if self.groups.len() == 1 {
                0
            } else {
                rng.random_range(0..self.groups.len() as u64) as usize
            };
            let shard = self.groups[g][pickers[g].sample(&mut rng)];
            let record = rng.random_range(0..self.shards[shard].records as u64) as usize;
            (shard, record)
        })
    }
}

/// Parsed shards behind a small LRU.
struct ShardCache {
    cache: LruCache<usize, Arc<Vec<CaptionRecord>>>,
}

impl ShardCache {
    fn new(capacity: usize) -> Self {
        ShardCache {
            cache: LruCache::new(NonZeroUsize::new(capacity.max(1)).expect("positive")),
        }
    }

    fn get(&mut self, set: &ShardSet, shard: usize) -> Result<Arc<Vec<CaptionRecord>>, PipeError> {
        if let Some(records) = self.cache.get(&shard) {
            return Ok(Arc::clone(records));
        }
        let info = &set.shards[shard];
        let records = read_shard(&info.path, set.feature_dim)?;
        if records.len() != info.records {
            return Err(PipeError::ShardChanged(info.path.clone()));
        }
        let records = Arc::new(records);
        self.cache.put(shard, Arc::clone(&records));
        Ok(records)
    }
}

/// `n` records drawn with replacement; reproducible for a given seed.
pub fn sample_stream(
    set: &ShardSet,
    seed: u64,
    n: usize,
) -> Result<impl Iterator<Item = Result<CaptionRecord, PipeError>> + '_, PipeError> {
    if set.shards.is_empty() {
        return Err(PipeError::EmptySet);
    }
    let mut cache = ShardCache::new(DEFAULT_CACHE_SHARDS);
    Ok(set
        .draws(seed)
        .take(n)
        .map(move |(shard, record)| cache.get(set, shard).map(|recs| recs[record].clone())))
}

/// Runs [`sample_stream`] on a producer thread feeding a bounded queue of
/// `capacity` records. The order of records is the same as the
/// single-threaded stream.
pub fn spawn_sampler(
    set: ShardSet,
    seed: u64,
    n: usize,
    capacity: usize,
) -> Result<Receiver<Result<CaptionRecord, PipeError>>, PipeError> {
    if set.shards.is_empty() {
        return Err(PipeError::EmptySet);
    }
    let (tx, rx) = sync_channel(capacity.max(1));
    thread::Builder::new()
        .name("clove-sampler".into())
        .spawn(move || {
            let stream = sample_stream(&set, seed, n).expect("non-empty set");
            for item in stream {
                let stop = item.is_err();
                if tx.send(item).is_err() || stop {
                    break;
                }
            }
        })
        .map_err(|source| PipeError::Io {
            path: PathBuf::from("<sampler thread>"),
            source,
        })?;
    Ok(rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::TempDir;

    fn shard(dir: &TempDir, name: &str, n: usize) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for i in 0..n {
            writeln!(f, r#"{{"id":"{name}-{i}","caption":"caption {i}"}}"#).unwrap();
        }
        path
    }

    #[test]
    fn counts_and_errors() {
        let dir = TempDir::new().unwrap();
        let a = shard(&dir, "a.jsonl", 3);
        let b = shard(&dir, "b.jsonl", 5);
        let set = open_shards(&[&a, &b], ShardOptions::default()).unwrap();
        assert_eq!(set.shards.iter().map(|s| s.records).collect::<Vec<_>>(), [3, 5]);

        let big = shard(&dir, "big.jsonl", 10_001);
        let err = open_shards(&[&big], ShardOptions::default()).unwrap_err();
        assert!(matches!(err, PipeError::OversizeShard { records: 10_001, max: 10_000, .. }));

        let bad = dir.path().join("bad.jsonl");
        std::fs::write(&bad, "{\"id\":\"x\"}\n").unwrap();
        assert!(matches!(
            open_shards(&[&bad], ShardOptions::default()).unwrap_err(),
            PipeError::Schema { line: 1, .. }
        ));
        assert!(matches!(
            open_shards::<&Path>(&[], ShardOptions::default()).unwrap_err(),
            PipeError::EmptySet
        ));
    }

    #[test]
    fn forced_and_empty_streams() {
        let dir = TempDir::new().unwrap();
        let one = shard(&dir, "one.jsonl", 1);
        let set = open_shards(&[&one], ShardOptions::default()).unwrap();
        let got: Vec<CaptionRecord> = sample_stream(&set, 3, 5).unwrap().map(Result::unwrap).collect();
        assert_eq!(got.len(), 5);
        assert!(got.iter().all(|r| r.id == "one.jsonl-0"));
        assert_eq!(sample_stream(&set, 3, 0).unwrap().count(), 0);
    }

    #[test]
    fn sampler_thread_matches_direct_stream() {
        let dir = TempDir::new().unwrap();
        let a = shard(&dir, "a.jsonl", 7);
        let b = shard(&dir, "b.jsonl", 2);
        let set = open_shards(&[&a, &b], ShardOptions::default()).unwrap();
        let direct: Vec<String> = sample_stream(&set, 9, 50).unwrap().map(|r| r.unwrap().id).collect();
        let threaded: Vec<String> = spawn_sampler(set, 9, 50, 4).unwrap().into_iter().map(|r| r.unwrap().id).collect();
        assert_eq!(direct, threaded);
    }

    #[test]
    fn single_set_combine_is_identity() {
        let dir = TempDir::new().unwrap();
        let a = shard(&dir, "a.jsonl", 2);
        let set = open_shards(&[&a], ShardOptions::default()).unwrap();
        assert_eq!(combine(vec![set.clone()], Combination::Uniform).unwrap(), set);
    }

    #[test]
    fn shard_rewritten_after_open_is_detected() {
        let dir = TempDir::new().unwrap();
        let a = shard(&dir, "a.jsonl", 2);
        let set = open_shards(&[&a], ShardOptions::default()).unwrap();
        shard(&dir, "a.jsonl", 3);
        let first = sample_stream(&set, 0, 1).unwrap().next().unwrap();
        assert!(matches!(first, Err(PipeError::ShardChanged(_))));
    }
}
