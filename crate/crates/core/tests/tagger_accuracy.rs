//! Token accuracy of the rule tagger against hand-tagged captions.

use clove::textproc::{tokenize, Tag, Tagger};
use clove::wordnet::{self, WordNetDB};

const GOLD: &str = include_str!("data/tagged_captions.txt");

fn gold() -> Vec<Vec<(String, Tag)>> {
    GOLD.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|pair| {
                    let (word, tag) = pair.rsplit_once('/').expect("word/TAG");
                    (word.to_string(), Tag::parse(tag).expect("known tag"))
                })
                .collect()
        })
        .collect()
}

fn accuracy(db: &WordNetDB) -> (usize, usize, Vec<String>) {
    let tagger = Tagger::new(db);
    let (mut right, mut total) = (0, 0);
    let mut misses = Vec::new();
    for sentence in gold() {
        let text = sentence.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ");
        let tagged = tagger.tag(&tokenize(&text));
        assert_eq!(tagged.len(), sentence.len(), "tokenization drift on {text:?}");
        for (tok, (_, want)) in tagged.iter().zip(&sentence) {
            total += 1;
            if tok.pos == *want {
                right += 1;
            } else {
                misses.push(format!("{}: {} want {}", text, tok.surface, want.as_str()));
            }
        }
    }
    (right, total, misses)
}

fn check(db: &WordNetDB, label: &str) {
    let (right, total, misses) = accuracy(db);
    let acc = right as f64 / total as f64;
    println!("{label}: {right}/{total} = {acc:.4}");
    for m in &misses {
        println!("  {m}");
    }
    assert_eq!(gold().len(), 200);
    assert!(acc >= 0.90, "{label} accuracy {acc:.4} below 0.90");
}

#[test]
fn bundled_fixture_accuracy() {
    check(wordnet::bundled(), "bundled");
}

#[test]
fn full_wordnet_accuracy() {
    let Ok(dir) = std::env::var("CLOVE_WORDNET") else {
        eprintln!("CLOVE_WORDNET unset; skipping");
        return;
    };
    check(&wordnet::load_wordnet(&dir).unwrap(), "full");
}
