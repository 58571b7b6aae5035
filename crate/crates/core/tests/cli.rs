//! The `clove` binary: exit statuses and a full command chain.

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use clove::datapipe::{read_shard, CaptionRecord};
use clove::patcher::Checkpoint;

fn clove(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clove"))
        .arg("--workdir")
        .arg(dir)
        .args(args)
        .env_remove("CLOVE_WORDNET")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn status(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const NOUNS: [&str; 6] = ["dog", "cat", "horse", "cow", "pig", "fox"];
const VERBS: [&str; 3] = ["chases", "watches", "bites"];

/// Captions with 45-wide one-hot image features, as the default model expects.
fn write_corpus(path: &Path, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lines: Vec<String> = (0..n)
        .map(|i| {
            let (s, v, o) = (rng.random_range(0..6), rng.random_range(0..3), rng.random_range(0..6));
            let mut x = vec![0.0f32; 45];
            x[s] = 1.0;
            x[20 + v] = 1.0;
            x[25 + o] = 1.0;
            let mut r = CaptionRecord::new(format!("r{i}"), format!("a {} {} a {}", NOUNS[s], VERBS[v], NOUNS[o]));
            r.image_features = Some(x);
            serde_json::to_string(&r).unwrap()
        })
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

const TRAIN: &str = "peak_lr = 0.003\nwarmup_steps = 2\ntotal_steps = 20\nbatch_size = 16\nlog_every = 5\n\n\
                     [model]\nvocab_size = 0\nd_t = 8\nd = 8\nd_img = 45\ntext_depth = 1\ntext_hidden = 8\n";

#[test]
fn alpha_out_of_range_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = clove(dir.path(), &["patch", "--pt", "a.clvt", "--ft", "b.clvt", "--alpha", "1.5", "--out", "c.clvt"]);
    assert_eq!(status(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("1.5"));
    let out = clove(dir.path(), &["patch", "--pt", "a.clvt", "--ft", "b.clvt", "--alpha", "-0.1", "--out", "c.clvt"]);
    assert_eq!(status(&out), 2);
}

#[test]
fn bad_toml_names_the_line() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seed = 1\n[finetune]\ntotal_steps = \"many\"\n").unwrap();
    let out = clove(dir.path(), &["demo-tradeoff", "--config", "bad.toml"]);
    assert_eq!(status(&out), 2);
    assert!(stderr(&out).contains("bad.toml:3:"), "{}", stderr(&out));
}

#[test]
fn usage_and_runtime_errors_differ() {
    let dir = TempDir::new().unwrap();
    let out = clove(dir.path(), &["build-freq", "--input", "absent.jsonl", "--output", "f.tsv"]);
    assert_eq!(status(&out), 2, "a pattern matching nothing is a usage error");
    std::fs::write(dir.path().join("a.clvt"), b"not a checkpoint").unwrap();
    let out = clove(dir.path(), &["patch", "--pt", "a.clvt", "--ft", "a.clvt", "--alpha", "0.5", "--out", "c.clvt"]);
    assert_eq!(status(&out), 1, "{}", stderr(&out));
}

#[test]
fn failed_check_exits_3() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("weak.toml"), "[finetune]\ntotal_steps = 2\nwarmup_steps = 1\n").unwrap();
    let out = clove(dir.path(), &["demo-tradeoff", "--config", "weak.toml", "--check", "--out", "weak"]);
    assert_eq!(status(&out), 3, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL finetuned_order"));
    // Without --check the same run succeeds and still writes its verdict.
    let out = clove(dir.path(), &["demo-tradeoff", "--config", "weak.toml", "--out", "weak2"]);
    assert_eq!(status(&out), 0);
    assert!(dir.path().join("weak2/summary.json").exists());
}

#[test]
fn command_chain() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_corpus(&dir.join("corpus.jsonl"), 200);
    std::fs::write(dir.join("train.toml"), TRAIN).unwrap();
    let ok = |args: &[&str]| {
        let out = clove(dir, args);
        assert_eq!(status(&out), 0, "{args:?}: {}", stderr(&out));
        out
    };

    ok(&["build-freq", "--input", "corpus.jsonl", "--output", "freq.tsv"]);
    ok(&[
        "gen-negatives", "--input", "corpus.jsonl", "--freq", "freq.tsv", "--strategies", "swap,replace", "--seed", "2",
        "--output", "neg.jsonl",
    ]);
    let records = read_shard(dir.join("neg.jsonl"), Some(45)).unwrap();
    assert_eq!(records.len(), 200);
    assert!(records.iter().filter(|r| r.negative_texts().count() > 0).count() > 150);

    let sample = ok(&["pipe", "sample", "--shards", "neg.jsonl", "--n", "7", "--seed", "1"]);
    assert_eq!(String::from_utf8_lossy(&sample.stdout).lines().count(), 7);

    ok(&["train", "--config", "train.toml", "--shards", "corpus.jsonl", "--negatives", "off", "--out", "pt.clvt"]);
    ok(&[
        "train", "--config", "train.toml", "--shards", "neg.jsonl", "--init", "pt.clvt", "--vocab", "pt.vocab.txt",
        "--out", "ft.clvt",
    ]);
    for f in ["pt.clvt", "pt.vocab.txt", "pt.metrics.csv", "pt.clvt.manifest.json", "ft.clvt", "ft.vocab.txt"] {
        assert!(dir.join(f).exists(), "{f}");
    }

    ok(&["patch", "--pt", "pt.clvt", "--ft", "ft.clvt", "--alpha", "0", "--out", "p0.clvt"]);
    assert_eq!(std::fs::read(dir.join("p0.clvt")).unwrap(), std::fs::read(dir.join("pt.clvt")).unwrap());
    ok(&["patch", "--pt", "pt.clvt", "--ft", "ft.clvt", "--alpha", "0.5", "--out", "mid.clvt"]);
    let [pt, ft, mid] = ["pt", "ft", "mid"].map(|n| Checkpoint::load(dir.join(format!("{n}.clvt"))).unwrap());
    let (a, b, m) = (pt.get("text.embedding").unwrap(), ft.get("text.embedding").unwrap(), mid.get("text.embedding").unwrap());
    for ((x, y), z) in a.data.iter().zip(&b.data).zip(&m.data) {
        assert!((0.5f64 * (*x as f64 + *y as f64) - *z as f64).abs() < 1e-6);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("mid.clvt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "patch");
    assert_eq!(manifest["config"]["alpha"], 0.5);

    std::fs::write(
        dir.join("choice.jsonl"),
        records
            .iter()
            .take(20)
            .map(|r| {
                let neg = r.negative_texts().next().unwrap_or("a fox bites a fox");
                serde_json::json!({"image_features": r.image_features, "positive": r.caption, "negatives": [neg]})
                    .to_string()
            })
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();
    std::fs::write(dir.join("task.toml"), "name = \"choice\"\nkind = \"caption_choice\"\nitems = \"choice.jsonl\"\n").unwrap();
    ok(&["eval", "--model", "mid.clvt", "--task", "task.toml", "--out", "eval.json"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["task"], "choice");
    assert_eq!(report["items"], 20);

    ok(&["sweep", "--pt", "pt.clvt", "--ft", "ft.clvt", "--alphas", "0,0.5,1", "--tasks", "task.toml", "--out", "sweep.csv"]);
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("alpha,metric,value"));
    assert!(csv.lines().any(|l| l.starts_with("0.5,choice.micro,")), "{csv}");
}
