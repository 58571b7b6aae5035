//! Write two small caption datasets as JSONL shards, then draw from them
//! by concatenation and by uniform dataset mixing, attaching negatives on
//! the way.
//!
//! ```bash
//! cargo run -p clove --example shard_sampling
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use clove::datapipe::{
    attach_negatives, combine, open_shards, sample_stream, spawn_sampler, write_jsonl, CaptionRecord, Combination,
    NegativeAttacher, ShardOptions,
};
use clove::negatives::{FrequencyTable, GenerateConfig};
use clove::wordnet::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let animals = ["dog", "cat", "horse", "cow"];

    // Dataset "a": three shards of 40 records, dataset "b": one of 10.
    let mut paths_a = Vec::new();
    for s in 0..3 {
        let path = dir.path().join(format!("a-{s}.jsonl"));
        let records: Vec<CaptionRecord> = (0..40)
            .map(|i| {
                let (x, y) = (animals[i % 4], animals[(i + 1 + s) % 4]);
                CaptionRecord::new(format!("a{s}-{i}"), format!("a {x} chases a {y}"))
            })
            .collect();
        write_jsonl(BufWriter::new(File::create(&path)?), &records)?;
        paths_a.push(path);
    }
    let path_b = dir.path().join("b-0.jsonl");
    let records: Vec<CaptionRecord> =
        (0..10).map(|i| CaptionRecord::new(format!("b-{i}"), format!("a {} on the grass", animals[i % 4]))).collect();
    write_jsonl(BufWriter::new(File::create(&path_b)?), &records)?;

    let a = open_shards(&paths_a, ShardOptions::default())?;
    let b = open_shards(&[&path_b], ShardOptions::default())?;
    println!("dataset a: {} records, dataset b: {} records", a.total_records(), b.total_records());

    for mode in [Combination::Concatenate, Combination::Uniform] {
        let set = combine(vec![a.clone(), b.clone()], mode)?;
        let mut counts = BTreeMap::new();
        for r in sample_stream(&set, 3, 2000)? {
            *counts.entry(r?.id[..1].to_string()).or_insert(0usize) += 1;
        }
        println!("{mode:?}: draws per dataset {counts:?}");
    }

    // The threaded sampler yields the same sequence as the synchronous one.
    let set = combine(vec![a, b], Combination::Uniform)?;
    let sync: Vec<String> = sample_stream(&set, 9, 50)?.map(|r| r.map(|r| r.id)).collect::<Result<_, _>>()?;
    let threaded: Vec<String> =
        spawn_sampler(set.clone(), 9, 50, 8)?.into_iter().map(|r| r.map(|r| r.id)).collect::<Result<_, _>>()?;
    println!("threaded sampler matches: {}", sync == threaded);

    let freq = FrequencyTable::from_captions(animals);
    let attacher = NegativeAttacher {
        db: bundled(),
        freq: &freq,
        config: GenerateConfig::default(),
        seed: 1,
        parallel: true,
    };
    for r in attach_negatives(sample_stream(&set, 4, 5)?, &attacher) {
        let r = r?;
        let negs: Vec<&str> = r.negative_texts().collect();
        println!("{:<8} {:<26} {negs:?}", r.id, r.caption);
    }
    Ok(())
}
