use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PartOfSpeech, Synset, SynsetId, WordNetDB, WordNetError};

/// License header carried by WordNet 3.0 files (lines start with two spaces).
pub const WORDNET_LICENSE: &str = r#"  1 This software and database is being provided to you, the LICENSEE, by
  2 Princeton University under the following license.  By obtaining, using
  3 and/or copying this software and database, you agree that you have
  4 read, understood, and will comply with these terms and conditions.:
  5
  6 Permission to use, copy, modify and distribute this software and
  7 database and its documentation for any purpose and without fee or
  8 royalty is hereby granted, provided that you agree to comply with
  9 the following copyright notice and statements, including the disclaimer,
  10 and that the same appear on ALL copies of the software, database and
  11 documentation, including modifications that you make for internal
  12 use or for distribution.
  13
  14 WordNet 3.0 Copyright 2006 by Princeton University.  All rights reserved.
  15
  16 THIS SOFTWARE AND DATABASE IS PROVIDED "AS IS" AND PRINCETON
  17 UNIVERSITY MAKES NO REPRESENTATIONS OR WARRANTIES, EXPRESS OR
  18 IMPLIED.  BY WAY OF EXAMPLE, BUT NOT LIMITATION, PRINCETON
  19 UNIVERSITY MAKES NO REPRESENTATIONS OR WARRANTIES OF MERCHANT-
  20 ABILITY OR FITNESS FOR ANY PARTICULAR PURPOSE OR THAT THE USE
  21 OF THE LICENSED SOFTWARE, DATABASE OR DOCUMENTATION WILL NOT
  22 INFRINGE ANY THIRD PARTY PATENTS, COPYRIGHTS, TRADEMARKS OR
  23 OTHER RIGHTS.
  24
  25 The name of Princeton University or Princeton may not be used in
  26 advertising or publicity pertaining to distribution of the software
  27 and/or database.  Title to copyright in this software, database and
  28 any associated documentation shall at all times remain with
  29 Princeton University and LICENSEE agrees to preserve same.
"#;

/// Writes the database as the eight standard files. Synsets are renumbered
/// so every offset is the byte position of its line, as in the original
/// distribution. Only the relations held in memory (hypernyms, antonyms)
/// are written; glosses are left empty.
pub fn write_wordnet(db: &WordNetDB, dir: impl AsRef<Path>) -> Result<(), WordNetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (data, remap) = render_data(db);
    for pos in PartOfSpeech::ALL {
        let path = dir.join(format!("data.{}", pos.file_suffix()));
        fs::write(path, &data[&pos])?;
        let path = dir.join(format!("index.{}", pos.file_suffix()));
        fs::write(path, render_index(db, pos, &remap))?;
    }
    Ok(())
}

fn ordered(db: &WordNetDB, pos: PartOfSpeech) -> Vec<&Synset> {
    let mut v: Vec<&Synset> = db.synsets().filter(|s| s.pos == pos).collect();
    v.sort_by_key(|s| s.id.offset);
    v
}

fn pointer_code(id: SynsetId, db: &WordNetDB) -> char {
    match db.synset(id) {
        Some(s) if s.satellite => 's',
        _ => id.pos.code(),
    }
}

fn data_line(synset: &Synset, db: &WordNetDB, remap: &HashMap<SynsetId, u32>) -> String {
    let new_offset = |id: &SynsetId| remap.get(id).copied().unwrap_or(0);
    let ss_type = if synset.satellite { 's' } else { synset.pos.code() };
    let mut line = format!(
        "{:08} {:02} {} {:02x}",
        new_offset(&synset.id),
        synset.lex_file,
        ss_type,
        synset.lemmas.len()
    );
    for lemma in &synset.lemmas {
        let _ = write!(line, " {lemma} 0");
    }
    let pointers = synset.hypernyms.len() + synset.antonym_pairs.len();
    let _ = write!(line, " {pointers:03}");
    for h in &synset.hypernyms {
        let _ = write!(line, " @ {:08} {} 0000", new_offset(h), pointer_code(*h, db));
    }
    for a in &synset.antonym_pairs {
        let src = synset.lemmas.iter().position(|l| *l == a.member).map_or(0, |i| i + 1);
        let tgt = db
            .synset(a.target)
            .and_then(|t| t.lemmas.iter().position(|l| *l == a.target_lemma))
            .map_or(0, |i| i + 1);
        let _ = write!(
            line,
            " ! {:08} {} {:02x}{:02x}",
            new_offset(&a.target),
            pointer_code(a.target, db),
            src,
            tgt
        );
    }
    if synset.pos == PartOfSpeech::Verb {
        line.push_str(" 00");
    }
    line.push_str(" |  \n");
    line
}

fn render_data(db: &WordNetDB) -> (HashMap<PartOfSpeech, String>, HashMap<SynsetId, u32>) {
    // Offsets are fixed-width, so line lengths do not depend on their values:
    // one pass with placeholder offsets fixes every position.
    let empty = HashMap::new();
    let mut remap = HashMap::new();
    for pos in PartOfSpeech::ALL {
        let mut cursor = WORDNET_LICENSE.len() as u32;
        for s in ordered(db, pos) {
            remap.insert(s.id, cursor);
            cursor += data_line(s, db, &empty).len() as u32;
        }
    }
    let mut out = HashMap::new();
    for pos in PartOfSpeech::ALL {
        let mut text = String::from(WORDNET_LICENSE);
        for s in ordered(db, pos) {
            debug_assert_eq!(text.len() as u32, remap[&s.id]);
            text.push_str(&data_line(s, db, &remap));
        }
        out.insert(pos, text);
    }
    (out, remap)
}

fn render_index(db: &WordNetDB, pos: PartOfSpeech, remap: &HashMap<SynsetId, u32>) -> String {
    let entries: BTreeMap<&str, &Vec<SynsetId>> = db
        .index_entries()
        .filter(|((_, p), _)| *p == pos)
        .map(|((lemma, _), ids)| (lemma.as_str(), ids))
        .collect();
    let mut text = String::from(WORDNET_LICENSE);
    for (lemma, ids) in entries {
        let mut symbols: Vec<&str> = Vec::new();
        for id in ids {
            if let Some(s) = db.synset(*id) {
                if !s.hypernyms.is_empty() && !symbols.contains(&"@") {
                    symbols.push("@");
                }
                if !s.antonym_pairs.is_empty() && !symbols.contains(&"!") {
                    symbols.push("!");
                }
            }
        }
        let _ = write!(text, "{lemma} {} {} {}", pos.code(), ids.len(), symbols.len());
        for sym in &symbols {
            let _ = write!(text, " {sym}");
        }
        let _ = write!(text, " {} 0", ids.len());
        for id in ids {
            let _ = write!(text, " {:08}", remap[id]);
        }
        text.push_str("  \n");
    }
    text
}

#[cfg(test)]
mod tests {
    use super::super::{load_wordnet, WordNetBuilder};
    use super::*;

    #[test]
    fn round_trip_preserves_counts() {
        let mut b = WordNetBuilder::new();
        let animal = b.add_synset(PartOfSpeech::Noun, &["animal"]);
        let dog = b.add_synset(PartOfSpeech::Noun, &["dog", "domestic_dog"]);
        let cat = b.add_synset(PartOfSpeech::Noun, &["cat"]);
        b.add_hypernym(dog, animal).add_hypernym(cat, animal);
        let run = b.add_synset(PartOfSpeech::Verb, &["run"]);
        let walk = b.add_synset(PartOfSpeech::Verb, &["walk"]);
        b.add_antonym(run, "run", walk, "walk");
        let hot = b.add_synset(PartOfSpeech::Adjective, &["hot"]);
        let cold = b.add_synset(PartOfSpeech::Adjective, &["cold"]);
        b.add_antonym(hot, "hot", cold, "cold");
        b.add_synset(PartOfSpeech::Adverb, &["quickly"]);
        let db = b.build().unwrap();

        let dir = tempfile::tempdir().unwrap();
        write_wordnet(&db, dir.path()).unwrap();
        let back = load_wordnet(dir.path()).unwrap();
        for pos in PartOfSpeech::ALL {
            assert_eq!(back.synset_count(pos), db.synset_count(pos), "{pos:?}");
            assert_eq!(back.lemma_count(pos), db.lemma_count(pos), "{pos:?}");
            assert_eq!(back.pointer_count(pos), db.pointer_count(pos), "{pos:?}");
        }
        assert_eq!(back.replacement_candidates("hot", PartOfSpeech::Adjective), vec!["cold"]);

        // Offsets are byte positions of their lines.
        let text = std::fs::read_to_string(dir.path().join("data.noun")).unwrap();
        for s in back.synsets().filter(|s| s.pos == PartOfSpeech::Noun) {
            let at = s.id.offset as usize;
            assert_eq!(&text[at..at + 8], format!("{:08}", s.id.offset));
        }
    }
}
