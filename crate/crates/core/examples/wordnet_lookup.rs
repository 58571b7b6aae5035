//! Load a WordNet 3.0 directory and print the lexical facts the REPLACE
//! generator relies on.
//!
//! ```bash
//! cargo run -p clove --example wordnet_lookup -- /path/to/wordnet/dict dog cat
//! ```
//!
//! With an empty directory argument and `CLOVE_WORDNET` unset the bundled
//! miniature database is used.

use std::path::Path;
use std::time::Instant;

use clove::wordnet::{load_or_bundled, PartOfSpeech};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().filter(|d| !d.is_empty()).or_else(|| std::env::var("CLOVE_WORDNET").ok());
    let words: Vec<String> = args.collect();

    let start = Instant::now();
    let db = load_or_bundled(dir.as_deref().map(Path::new))?;
    println!("loaded in {:.2?}", start.elapsed());
    for pos in PartOfSpeech::ALL {
        println!(
            "{:>9}: {:>6} synsets, {:>6} lemmas",
            format!("{pos:?}"),
            db.synset_count(pos),
            db.lemma_count(pos)
        );
    }

    let words = if words.is_empty() {
        vec!["dog".to_string(), "hot".to_string(), "on".to_string()]
    } else {
        words
    };
    for word in &words {
        for pos in PartOfSpeech::ALL {
            let ids = db.synsets_of(word, pos);
            if ids.is_empty() {
                continue;
            }
            let candidates = db.replacement_candidates(word, pos);
            let shown: Vec<&str> = candidates.iter().take(12).map(String::as_str).collect();
            println!(
                "{word} ({pos:?}): {} synsets, {} candidates {shown:?}{}",
                ids.len(),
                candidates.len(),
                if candidates.len() > shown.len() { " ..." } else { "" }
            );
        }
    }
    if words.len() >= 2 {
        for pos in PartOfSpeech::ALL {
            if db.shares_synset(&words[0], &words[1], pos) {
                println!("{} and {} are synonyms as {pos:?}", words[0], words[1]);
            }
        }
    }
    Ok(())
}
