//! WordNet 3.0 lexical database.
//!
//! Reads the `data.*` / `index.*` files of the standard distribution and
//! answers the lexical queries the negative generators need: synset lookup,
//! synonym detection, and replacement candidates (antonyms plus words that
//! share a hypernym or grand-hypernym).

mod parse;
mod write;

use std::borrow::Cow;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use parse::{load_wordnet, parse_wordnet};
pub use write::{write_wordnet, WORDNET_LICENSE};

macro_rules! mini {
    ($name:literal) => {
        include_str!(concat!("../../data/wordnet-mini/", $name))
    };
}

/// Miniature database shipped with the crate: the demo vocabulary and the
/// words of the tagger test captions, cut from WordNet 3.0 with their
/// ancestors two levels up and their antonyms.
pub fn bundled() -> &'static WordNetDB {
    static DB: OnceLock<WordNetDB> = OnceLock::new();
    DB.get_or_init(|| {
        parse_wordnet(&[
            (PartOfSpeech::Noun, mini!("data.noun"), mini!("index.noun")),
            (PartOfSpeech::Verb, mini!("data.verb"), mini!("index.verb")),
            (PartOfSpeech::Adjective, mini!("data.adj"), mini!("index.adj")),
            (PartOfSpeech::Adverb, mini!("data.adv"), mini!("index.adv")),
        ])
        .expect("bundled WordNet fixture parses")
    })
}

/// `dir` when given, else the bundled fixture.
pub fn load_or_bundled(dir: Option<&Path>) -> Result<Cow<'static, WordNetDB>, WordNetError> {
    match dir {
        Some(dir) => load_wordnet(dir).map(Cow::Owned),
        None => Ok(Cow::Borrowed(bundled())),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WordNetError {
    #[error("missing WordNet file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("inconsistent database: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse WordNet part of speech. Adjective satellites are folded into
/// [`PartOfSpeech::Adjective`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl PartOfSpeech {
    pub const ALL: [PartOfSpeech; 4] = [
        PartOfSpeech::Noun,
        PartOfSpeech::Verb,
        PartOfSpeech::Adjective,
        PartOfSpeech::Adverb,
    ];

    /// Suffix used in the database file names (`data.noun`, `index.adj`, ...).
    pub fn file_suffix(self) -> &'static str {
        match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adjective => "adj",
            PartOfSpeech::Adverb => "adv",
        }
    }

    pub fn code(self) -> char {
        match self {
            PartOfSpeech::Noun => 'n',
            PartOfSpeech::Verb => 'v',
            PartOfSpeech::Adjective => 'a',
            PartOfSpeech::Adverb => 'r',
        }
    }

    /// Parses a one-letter pos code; `s` (satellite) maps to adjective.
    pub fn from_code(code: &str) -> Option<PartOfSpeech> {
        match code {
            "n" => Some(PartOfSpeech::Noun),
            "v" => Some(PartOfSpeech::Verb),
            "a" | "s" => Some(PartOfSpeech::Adjective),
            "r" => Some(PartOfSpeech::Adverb),
            _ => None,
        }
    }
}

/// Synset identifier: byte offset in the data file plus part of speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId {
    pub offset: u32,
    pub pos: PartOfSpeech,
}

impl SynsetId {
    pub fn new(offset: u32, pos: PartOfSpeech) -> Self {
        SynsetId { offset, pos }
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}-{}", self.offset, self.pos.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntonymPair {
    pub member: String,
    pub target: SynsetId,
    pub target_lemma: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    pub pos: PartOfSpeech,
    /// Lemmas as spelled in the data file, adjective markers stripped.
    pub lemmas: Vec<String>,
    /// Hypernyms and instance hypernyms.
    pub hypernyms: Vec<SynsetId>,
    pub antonym_pairs: Vec<AntonymPair>,
    /// Adjective satellite (`s` in the data file).
    pub satellite: bool,
    pub lex_file: u8,
}

impl Synset {
    fn has_lemma(&self, normalized: &str) -> bool {
        self.lemmas.iter().any(|l| normalize_lemma(l) == normalized)
    }
}

/// Lowercases and joins multi-word input with underscores, the way WordNet
/// spells collocations.
pub fn normalize_lemma(lemma: &str) -> String {
    lemma
        .trim()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

/// Parsed, fully indexed WordNet database. Immutable after construction.
#[derive(Debug, Clone, Default)]
pub struct WordNetDB {
    synsets: HashMap<SynsetId, Synset>,
    lemma_index: HashMap<(String, PartOfSpeech), Vec<SynsetId>>,
    hyponyms: HashMap<SynsetId, Vec<SynsetId>>,
}

impl WordNetDB {
    /// Assembles a database from synsets and an index, checking every
    /// reference. Index lists keep the order they are given in.
    pub fn from_parts(
        synsets: HashMap<SynsetId, Synset>,
        lemma_index: HashMap<(String, PartOfSpeech), Vec<SynsetId>>,
    ) -> Result<Self, WordNetError> {
        for synset in synsets.values() {
            if synset.lemmas.is_empty() {
                return Err(WordNetError::Inconsistent(format!(
                    "synset {} has no lemmas",
                    synset.id
                )));
            }
            if !synset.hypernyms.is_empty()
                && !matches!(synset.pos, PartOfSpeech::Noun | PartOfSpeech::Verb)
            {
                return Err(WordNetError::Inconsistent(format!(
                    "hypernym pointer on non noun/verb synset {}",
                    synset.id
                )));
            }
            let targets = synset
                .hypernyms
                .iter()
                .chain(synset.antonym_pairs.iter().map(|a| &a.target));
            for target in targets {
                match synsets.get(target) {
                    Some(t) if t.pos == target.pos => {}
                    _ => {
                        return Err(WordNetError::Inconsistent(format!(
                            "synset {} points to missing synset {}",
                            synset.id, target
                        )))
                    }
                }
            }
        }
        for ((lemma, pos), ids) in &lemma_index {
            if ids.is_empty() {
                return Err(WordNetError::Inconsistent(format!(
                    "empty index entry for {lemma}"
                )));
            }
            for id in ids {
                match synsets.get(id) {
                    Some(s) if s.pos == *pos && s.has_lemma(lemma) => {}
                    Some(_) => {
                        return Err(WordNetError::Inconsistent(format!(
                            "index entry {lemma} lists synset {id} which does not contain it"
                        )))
                    }
                    None => {
                        return Err(WordNetError::Inconsistent(format!(
                            "index entry {lemma} lists missing synset {id}"
                        )))
                    }
                }
            }
        }

        let mut hyponyms: HashMap<SynsetId, Vec<SynsetId>> = HashMap::new();
        let mut ordered: Vec<&Synset> = synsets.values().collect();
        ordered.sort_by_key(|s| s.id);
        for synset in ordered {
            for parent in &synset.hypernyms {
                hyponyms.entry(*parent).or_default().push(synset.id);
            }
        }

        Ok(WordNetDB {
            synsets,
            lemma_index,
            hyponyms,
        })
    }

    pub fn synset(&self, id: SynsetId) -> Option<&Synset> {
        self.synsets.get(&id)
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    pub fn synset_count(&self, pos: PartOfSpeech) -> usize {
        self.synsets.values().filter(|s| s.pos == pos).count()
    }

    pub fn lemma_count(&self, pos: PartOfSpeech) -> usize {
        self.lemma_index.keys().filter(|(_, p)| *p == pos).count()
    }

    /// Hypernym plus antonym pointer count for synsets of `pos`.
    pub fn pointer_count(&self, pos: PartOfSpeech) -> usize {
        self.synsets
            .values()
            .filter(|s| s.pos == pos)
            .map(|s| s.hypernyms.len() + s.antonym_pairs.len())
            .sum()
    }

    pub(crate) fn index_entries(&self) -> impl Iterator<Item = (&(String, PartOfSpeech), &Vec<SynsetId>)> {
        self.lemma_index.iter()
    }

    /// Synsets containing `lemma`, in index-file (sense) order.
    pub fn synsets_of(&self, lemma: &str, pos: PartOfSpeech) -> &[SynsetId] {
        self.lemma_index
            .get(&(normalize_lemma(lemma), pos))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, lemma: &str, pos: PartOfSpeech) -> bool {
        !self.synsets_of(lemma, pos).is_empty()
    }

    /// True iff some synset of `pos` contains both lemmas.
    pub fn shares_synset(&self, lemma_a: &str, lemma_b: &str, pos: PartOfSpeech) -> bool {
        let a: HashSet<&SynsetId> = self.synsets_of(lemma_a, pos).iter().collect();
        self.synsets_of(lemma_b, pos).iter().any(|id| a.contains(id))
    }

    /// Parents (level 1) and grandparents (level 2) of a synset. The visited
    /// set keeps cyclic hypernym data from looping.
    fn ancestors(&self, id: SynsetId) -> HashSet<SynsetId> {
        let mut seen = HashSet::new();
        let mut frontier = vec![id];
        for _ in 0..2 {
            let mut next = Vec::new();
            for node in frontier {
                if let Some(s) = self.synsets.get(&node) {
                    for parent in &s.hypernyms {
                        if *parent != id && seen.insert(*parent) {
                            next.push(*parent);
                        }
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    /// Children and grandchildren of a synset.
    fn descendants(&self, id: SynsetId) -> HashSet<SynsetId> {
        let mut seen = HashSet::new();
        let mut frontier = vec![id];
        for _ in 0..2 {
            let mut next = Vec::new();
            for node in frontier {
                for child in self.hyponyms.get(&node).into_iter().flatten() {
                    if *child != id && seen.insert(*child) {
                        next.push(*child);
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    /// Replacement words for `lemma`: antonyms of any of its synsets, plus
    /// lemmas of synsets that share a parent or grandparent with one of its
    /// synsets. Direct ancestors and descendants of the query synsets are not
    /// siblings and are skipped. Multi-word lemmas, the query itself and
    /// synonyms are excluded. Sorted and deduplicated.
    pub fn replacement_candidates(&self, lemma: &str, pos: PartOfSpeech) -> Vec<String> {
        let query = normalize_lemma(lemma);
        let own = self.synsets_of(&query, pos);
        if own.is_empty() {
            return Vec::new();
        }
        let own_set: HashSet<SynsetId> = own.iter().copied().collect();

        let lineage: Vec<(HashSet<SynsetId>, HashSet<SynsetId>)> =
            own.iter().map(|id| (self.ancestors(*id), self.descendants(*id))).collect();
        let related: HashSet<SynsetId> = lineage
            .iter()
            .flat_map(|(up, down)| up.iter().chain(down.iter()).copied())
            .collect();

        let mut words: BTreeSet<String> = BTreeSet::new();
        for (id, (ancestors, _)) in own.iter().zip(&lineage) {
            let Some(synset) = self.synsets.get(id) else {
                continue;
            };
            for pair in &synset.antonym_pairs {
                if normalize_lemma(&pair.member) == query {
                    words.insert(normalize_lemma(&pair.target_lemma));
                }
            }
            for ancestor in ancestors {
                for sibling in self.descendants(*ancestor) {
                    if own_set.contains(&sibling) || related.contains(&sibling) {
                        continue;
                    }
                    if let Some(s) = self.synsets.get(&sibling) {
                        words.extend(s.lemmas.iter().map(|l| normalize_lemma(l)));
                    }
                }
            }
        }

        words
            .into_iter()
            .filter(|w| !w.contains('_') && !w.contains('-') && *w != query)
            .filter(|w| !self.shares_synset(w, &query, pos))
            .collect()
    }

    /// Copy restricted to `keep`; pointers and index entries that leave the
    /// kept set are dropped.
    /// Every synset of the given lemmas in any part of speech, their
    /// ancestors up to two levels, and their antonym targets. Restricting to
    /// this set keeps all lexical queries on the lemmas answerable.
    pub fn vocabulary_closure<'s>(&self, lemmas: impl IntoIterator<Item = &'s str>) -> HashSet<SynsetId> {
        let mut keep = HashSet::new();
        for lemma in lemmas {
            for pos in PartOfSpeech::ALL {
                for &id in self.synsets_of(lemma, pos) {
                    keep.insert(id);
                    keep.extend(self.ancestors(id));
                    keep.extend(self.synsets[&id].antonym_pairs.iter().map(|a| a.target));
                }
            }
        }
        keep
    }

    pub fn restrict(&self, keep: &HashSet<SynsetId>) -> WordNetDB {
        let synsets: HashMap<SynsetId, Synset> = self
            .synsets
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .map(|(id, s)| {
                let mut s = s.clone();
                s.hypernyms.retain(|h| keep.contains(h));
                s.antonym_pairs.retain(|a| keep.contains(&a.target));
                (*id, s)
            })
            .collect();
        let lemma_index = self
            .lemma_index
            .iter()
            .filter_map(|(key, ids)| {
                let ids: Vec<SynsetId> = ids.iter().copied().filter(|i| keep.contains(i)).collect();
                (!ids.is_empty()).then(|| (key.clone(), ids))
            })
            .collect();
        WordNetDB::from_parts(synsets, lemma_index).expect("restriction preserves consistency")
    }
}

/// Incremental construction of small databases, used for fixtures.
#[derive(Debug, Default)]
pub struct WordNetBuilder {
    synsets: Vec<Synset>,
    next_offset: [u32; 4],
}

impl WordNetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_synset(&mut self, pos: PartOfSpeech, lemmas: &[&str]) -> SynsetId {
        let slot = pos as usize;
        self.next_offset[slot] += 1;
        let id = SynsetId::new(self.next_offset[slot], pos);
        self.synsets.push(Synset {
            id,
            pos,
            lemmas: lemmas.iter().map(|l| l.to_string()).collect(),
            hypernyms: Vec::new(),
            antonym_pairs: Vec::new(),
            satellite: false,
            lex_file: 0,
        });
        id
    }

    fn get_mut(&mut self, id: SynsetId) -> &mut Synset {
        self.synsets
            .iter_mut()
            .find(|s| s.id == id)
            .expect("synset created by this builder")
    }

    pub fn add_hypernym(&mut self, child: SynsetId, parent: SynsetId) -> &mut Self {
        self.get_mut(child).hypernyms.push(parent);
        self
    }

    /// Adds the antonym pointer in both directions.
    pub fn add_antonym(&mut self, a: SynsetId, lemma_a: &str, b: SynsetId, lemma_b: &str) -> &mut Self {
        self.get_mut(a).antonym_pairs.push(AntonymPair {
            member: lemma_a.to_string(),
            target: b,
            target_lemma: lemma_b.to_string(),
        });
        self.get_mut(b).antonym_pairs.push(AntonymPair {
            member: lemma_b.to_string(),
            target: a,
            target_lemma: lemma_a.to_string(),
        });
        self
    }

    pub fn build(self) -> Result<WordNetDB, WordNetError> {
        let mut lemma_index: HashMap<(String, PartOfSpeech), Vec<SynsetId>> = HashMap::new();
        for s in &self.synsets {
            for lemma in &s.lemmas {
                let entry = lemma_index.entry((normalize_lemma(lemma), s.pos)).or_default();
                if !entry.contains(&s.id) {
                    entry.push(s.id);
                }
            }
        }
        let synsets = self.synsets.into_iter().map(|s| (s.id, s)).collect();
        WordNetDB::from_parts(synsets, lemma_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// dog -> canine -> animal, cat -> feline -> animal, plus hot/cold.
    pub(crate) fn fixture() -> WordNetDB {
        let mut b = WordNetBuilder::new();
        let animal = b.add_synset(PartOfSpeech::Noun, &["animal", "beast"]);
        let canine = b.add_synset(PartOfSpeech::Noun, &["canine"]);
        let feline = b.add_synset(PartOfSpeech::Noun, &["feline"]);
        let dog = b.add_synset(PartOfSpeech::Noun, &["dog", "domestic_dog"]);
        let cat = b.add_synset(PartOfSpeech::Noun, &["cat", "true_cat"]);
        let pup = b.add_synset(PartOfSpeech::Noun, &["puppy"]);
        let hound = b.add_synset(PartOfSpeech::Noun, &["hound", "dog"]);
        b.add_hypernym(canine, animal)
            .add_hypernym(feline, animal)
            .add_hypernym(dog, canine)
            .add_hypernym(cat, feline)
            .add_hypernym(pup, dog)
            .add_hypernym(hound, canine);
        let hot = b.add_synset(PartOfSpeech::Adjective, &["hot"]);
        let cold = b.add_synset(PartOfSpeech::Adjective, &["cold"]);
        b.add_antonym(hot, "hot", cold, "cold");
        b.build().unwrap()
    }

    #[test]
    fn synsets_of_folds_case() {
        let db = fixture();
        assert_eq!(db.synsets_of("dog", PartOfSpeech::Noun).len(), 2);
        assert_eq!(
            db.synsets_of("Dog", PartOfSpeech::Noun),
            db.synsets_of("dog", PartOfSpeech::Noun)
        );
        assert!(db.synsets_of("qzxv", PartOfSpeech::Noun).is_empty());
        assert!(db.synsets_of("domestic dog", PartOfSpeech::Noun).len() == 1);
    }

    #[test]
    fn shares_synset_cases() {
        let db = fixture();
        assert!(db.shares_synset("dog", "domestic_dog", PartOfSpeech::Noun));
        assert!(db.shares_synset("hound", "dog", PartOfSpeech::Noun));
        assert!(!db.shares_synset("dog", "cat", PartOfSpeech::Noun));
        assert!(!db.shares_synset("x", "x", PartOfSpeech::Noun));
        assert!(!db.shares_synset("dog", "dog", PartOfSpeech::Verb));
    }

    #[test]
    fn candidates_follow_grand_co_hypernym() {
        let db = fixture();
        let c = db.replacement_candidates("dog", PartOfSpeech::Noun);
        assert!(c.contains(&"cat".to_string()), "{c:?}");
        assert!(!c.contains(&"dog".to_string()));
        // hound shares a synset with dog: synonym veto
        assert!(!c.contains(&"hound".to_string()));
        // ancestors and descendants are not siblings
        assert!(!c.contains(&"canine".to_string()));
        assert!(!c.contains(&"puppy".to_string()));
        // multi-word lemmas are skipped
        assert!(c.iter().all(|w| !w.contains('_')));
        assert_eq!(db.replacement_candidates("hot", PartOfSpeech::Adjective), vec!["cold"]);
        assert!(db.replacement_candidates("nothing", PartOfSpeech::Noun).is_empty());
    }

    #[test]
    fn cyclic_hypernyms_terminate() {
        let mut b = WordNetBuilder::new();
        let x = b.add_synset(PartOfSpeech::Noun, &["x"]);
        let y = b.add_synset(PartOfSpeech::Noun, &["y"]);
        let z = b.add_synset(PartOfSpeech::Noun, &["z"]);
        b.add_hypernym(x, y).add_hypernym(y, x).add_hypernym(z, y);
        let db = b.build().unwrap();
        let c = db.replacement_candidates("x", PartOfSpeech::Noun);
        assert!(!c.contains(&"x".to_string()));
    }

    #[test]
    fn dangling_pointer_rejected() {
        let mut b = WordNetBuilder::new();
        let x = b.add_synset(PartOfSpeech::Noun, &["x"]);
        b.add_hypernym(x, SynsetId::new(99, PartOfSpeech::Noun));
        assert!(matches!(b.build(), Err(WordNetError::Inconsistent(_))));
    }

    #[test]
    fn restrict_drops_outside_pointers() {
        let db = fixture();
        let keep: HashSet<SynsetId> = db
            .synsets_of("dog", PartOfSpeech::Noun)
            .iter()
            .copied()
            .collect();
        let small = db.restrict(&keep);
        assert_eq!(small.synset_count(PartOfSpeech::Noun), 2);
        assert_eq!(small.pointer_count(PartOfSpeech::Noun), 0);
    }

    #[test]
    fn bundled_fixture_matches_its_files() {
        let db = bundled();
        for (pos, data) in [
            (PartOfSpeech::Noun, mini!("data.noun")),
            (PartOfSpeech::Verb, mini!("data.verb")),
            (PartOfSpeech::Adjective, mini!("data.adj")),
            (PartOfSpeech::Adverb, mini!("data.adv")),
        ] {
            let lines = data.lines().filter(|l| !l.starts_with("  ")).count();
            assert_eq!(db.synset_count(pos), lines, "{pos:?}");
        }
        assert!(db.shares_synset("car", "automobile", PartOfSpeech::Noun));
        assert!(db
            .replacement_candidates("hot", PartOfSpeech::Adjective)
            .contains(&"cold".to_string()));
        assert!(db
            .replacement_candidates("dog", PartOfSpeech::Noun)
            .contains(&"cat".to_string()));
    }
}
