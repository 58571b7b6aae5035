//! Cut a miniature WordNet out of the full distribution.
//!
//! Every word in the vocabulary files is lemmatized against the full database
//! in all four parts of speech (closed-class words are skipped); the synsets of those lemmas, their ancestors up
//! to two levels and their antonym targets are kept, and the result is written
//! back out in the standard file format.
//!
//! ```bash
//! cargo run -p clove --example wordnet_fixture -- /path/to/wordnet/dict out/ vocab.txt [more.txt ...]
//! ```
//!
//! Vocabulary files hold whitespace-separated words; `#` starts a comment line
//! and `word/TAG` pairs are accepted, so the tagger's gold file works as-is.

use std::collections::BTreeSet;

use clove::textproc::{base_form, Lexicon};
use clove::wordnet::{load_wordnet, write_wordnet, PartOfSpeech};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 3 {
        eprintln!("usage: wordnet_fixture WORDNET_DIR OUT_DIR VOCAB...");
        std::process::exit(2);
    }
    let db = load_wordnet(&args[0])?;

    let mut words = BTreeSet::new();
    for path in &args[2..] {
        for line in std::fs::read_to_string(path)?.lines() {
            if line.starts_with('#') {
                continue;
            }
            for item in line.split_whitespace() {
                let word = item.split('/').next().unwrap_or(item).to_lowercase();
                if word.chars().all(|c| c.is_alphabetic() || c == '_' || c == '\'') {
                    words.insert(word);
                }
            }
        }
    }

    // Closed-class words never reach WordNet in the tagger.
    let lex = Lexicon::builtin();
    let mut lemmas = BTreeSet::new();
    for word in words.iter().filter(|w| lex.closed_tag(w).is_none() && !lex.is_adp_or_adv(w)) {
        for pos in PartOfSpeech::ALL {
            if let Some(lemma) = base_form(word, pos, &db) {
                lemmas.insert(lemma);
            }
        }
    }

    let keep = db.vocabulary_closure(lemmas.iter().map(String::as_str));
    let mini = db.restrict(&keep);
    write_wordnet(&mini, &args[1])?;
    println!("{} words, {} lemmas, {} synsets", words.len(), lemmas.len(), keep.len());
    for pos in PartOfSpeech::ALL {
        println!("{:>9}: {} synsets", format!("{pos:?}"), mini.synset_count(pos));
    }
    Ok(())
}
