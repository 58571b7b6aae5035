//! Tag captions, extract their scene graphs and derive one hard negative
//! per strategy.
//!
//! ```bash
//! cargo run -p clove --example caption_negatives -- "A brown dog chases a cat on the grass"
//! ```
//!
//! Replacement words are weighted by a frequency table built from the
//! captions themselves plus a few extra animal and place words.

use clove::negatives::{gen_negate, gen_replace, gen_shuffle, gen_swap, FrequencyTable, Strategy};
use clove::textproc::ParsedCaption;
use clove::wordnet::load_or_bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut captions: Vec<String> = std::env::args().skip(1).collect();
    if captions.is_empty() {
        captions = vec![
            "A brown dog chases a cat on the grass".into(),
            "two men are riding horses near the beach".into(),
            "a woman holding an umbrella in the rain".into(),
        ];
    }
    let dir = std::env::var_os("CLOVE_WORDNET").map(std::path::PathBuf::from);
    let db = load_or_bundled(dir.as_deref())?;

    let mut freq = FrequencyTable::from_captions(&captions);
    for (word, n) in [("horse", 40), ("cow", 25), ("sheep", 10), ("field", 30), ("road", 12)] {
        freq.add(word, n);
    }

    for (i, caption) in captions.iter().enumerate() {
        let parsed = ParsedCaption::parse(caption, &db);
        println!("{caption}");
        let tags: Vec<String> = parsed.tokens.iter().map(|t| format!("{}/{:?}", t.surface, t.pos)).collect();
        println!("  tags      {}", tags.join(" "));
        let word = |k: usize| parsed.tokens[k].surface.as_str();
        for e in &parsed.graph.entities {
            let attrs: Vec<&str> = e.attributes.iter().map(|&a| word(a)).collect();
            println!("  entity    {} {attrs:?}", word(e.head));
        }
        for r in &parsed.graph.relations {
            let pred: Vec<&str> = r.predicate.iter().map(|&p| word(p)).collect();
            println!("  relation  {} -[{}]-> {}", word(r.subject), pred.join(" "), word(r.object));
        }

        let seed = 7 + i as u64;
        for strategy in Strategy::ALL {
            let neg = match strategy {
                Strategy::Replace => gen_replace(&parsed, &db, &freq, seed),
                Strategy::Swap => gen_swap(&parsed, seed),
                Strategy::Negate => gen_negate(&parsed, seed),
                Strategy::Shuffle => gen_shuffle(&parsed, seed),
            };
            match neg {
                Some(n) => println!("  {:<8}  {}", strategy.as_str(), n.text),
                None => println!("  {:<8}  (not applicable)", strategy.as_str()),
            }
        }
        println!();
    }
    Ok(())
}
