//! Draw distributions of shard sampling and dataset combination.

use std::io::Write;
use std::path::PathBuf;

use clove::datapipe::{combine, open_shards, sample_stream, Combination, ShardOptions, ShardSet};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tempfile::TempDir;

fn shard(dir: &TempDir, name: &str, n: usize) -> PathBuf {
    let path = dir.path().join(name);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    for i in 0..n {
        writeln!(f, r#"{{"id":"{name}:{i}","caption":"item {i}"}}"#).unwrap();
    }
    path
}

fn open(paths: &[PathBuf]) -> ShardSet {
    open_shards(paths, ShardOptions::default()).unwrap()
}

fn shard_counts(set: &ShardSet, seed: u64, n: usize) -> Vec<usize> {
    let mut counts = vec![0; set.shards.len()];
    for (shard, _) in set.draws(seed).take(n) {
        counts[shard] += 1;
    }
    counts
}

#[test]
fn draws_proportional_to_shard_size() {
    let dir = TempDir::new().unwrap();
    let set = open(&[shard(&dir, "big.jsonl", 9_000), shard(&dir, "small.jsonl", 1_000)]);
    let n = 100_000;
    let counts = shard_counts(&set, 1, n);
    let share = counts[0] as f64 / n as f64;
    assert!((share - 0.9).abs() <= 0.01, "first shard share {share}");
}

#[test]
fn concatenation_matches_single_pool() {
    let dir = TempDir::new().unwrap();
    let sizes = [300, 1_200, 2_500];
    let sets: Vec<ShardSet> = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| open(&[shard(&dir, &format!("s{i}.jsonl"), n)]))
        .collect();
    let pooled = combine(sets, Combination::Concatenate).unwrap();
    let n = 100_000;
    let counts = shard_counts(&pooled, 7, n);
    let total: usize = sizes.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(sizes)
        .map(|(&o, size)| {
            let e = n as f64 * size as f64 / total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((sizes.len() - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat:.3}, p = {p:.4}");
}

#[test]
fn uniform_versus_concatenated_sources() {
    let dir = TempDir::new().unwrap();
    let small_n = 10;
    let large = open(&[shard(&dir, "large.jsonl", 700 * small_n)]);
    let small = open(&[shard(&dir, "small.jsonl", small_n)]);
    let n = 100_000;

    let concat = combine(vec![large.clone(), small.clone()], Combination::Concatenate).unwrap();
    let seen = shard_counts(&concat, 3, n)[1] as f64;
    let p = 1.0 / 701.0;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    assert!((seen - n as f64 * p).abs() < 4.0 * sd, "small set drawn {seen} times");

    let uniform = combine(vec![large, small], Combination::Uniform).unwrap();
    let share = shard_counts(&uniform, 3, n)[1] as f64 / n as f64;
    assert!((share - 0.5).abs() <= 0.01, "uniform small share {share}");
}

#[test]
fn stream_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<PathBuf> = (0..12).map(|i| shard(&dir, &format!("p{i:02}.jsonl"), 20 + i)).collect();
    let set = open(&paths);
    let run = |seed| -> Vec<String> {
        sample_stream(&set, seed, 2_000)
            .unwrap()
            .map(|r| serde_json::to_string(&r.unwrap()).unwrap())
            .collect()
    };
    assert_eq!(run(4), run(4));
    assert_ne!(run(4), run(5));
}
