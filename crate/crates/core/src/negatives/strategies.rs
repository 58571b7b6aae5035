use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{apply_edits, Edit, FrequencyTable, NegativeCaption, Strategy};
use crate::textproc::{inflect, transfer_casing, Lexicon, ParsedCaption, Tag, Token};
use crate::wordnet::{PartOfSpeech, WordNetDB};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn flags(parsed: &ParsedCaption) -> Vec<String> {
    if parsed.graph.unlinked_conjunction {
        vec!["conjunction-unlinked".to_string()]
    } else {
        Vec::new()
    }
}

fn finish(
    parsed: &ParsedCaption,
    strategy: Strategy,
    edits: Vec<Edit>,
    seed: u64,
    source: String,
) -> Option<NegativeCaption> {
    let text = apply_edits(&parsed.text, &edits);
    (text.to_lowercase() != parsed.text.to_lowercase()).then(|| NegativeCaption {
        text,
        strategy,
        edits,
        seed,
        source,
        flags: flags(parsed),
    })
}

#[derive(Debug, Clone, Copy)]
enum SiteKind {
    WordNet(PartOfSpeech),
    Preposition,
}

struct Choice {
    lemma: String,
    surface: String,
}

struct Site {
    token: usize,
    kind: SiteKind,
    choices: Vec<Choice>,
}

/// Entity heads, attributes, non-auxiliary relation verbs and every
/// preposition, in token order.
fn replace_sites(parsed: &ParsedCaption, lex: &Lexicon) -> BTreeMap<usize, SiteKind> {
    let tokens = &parsed.tokens;
    let mut sites = BTreeMap::new();
    for entity in &parsed.graph.entities {
        if matches!(tokens[entity.head].pos, Tag::Noun | Tag::Propn) {
            sites.insert(entity.head, SiteKind::WordNet(PartOfSpeech::Noun));
        }
        for &a in &entity.attributes {
            sites.insert(a, SiteKind::WordNet(PartOfSpeech::Adjective));
        }
    }
    for relation in &parsed.graph.relations {
        for &p in &relation.predicate {
            if tokens[p].pos == Tag::Verb && !lex.is_auxiliary(&tokens[p].lemma) {
                sites.insert(p, SiteKind::WordNet(PartOfSpeech::Verb));
            }
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        if t.pos == Tag::Adp {
            sites.insert(i, SiteKind::Preposition);
        }
    }
    sites
}

fn choices(token: &Token, kind: SiteKind, db: &WordNetDB, lex: &Lexicon) -> Vec<Choice> {
    let lower = token.lower();
    let single_word = |w: &str| !w.is_empty() && w.chars().all(char::is_alphabetic);
    let raw: Vec<(String, String)> = match kind {
        SiteKind::Preposition => lex
            .preposition_alternatives(&lower)
            .iter()
            .map(|alt| (alt.clone(), alt.clone()))
            .collect(),
        SiteKind::WordNet(pos) => {
            let tag = if token.pos == Tag::Propn { Tag::Noun } else { token.pos };
            db.replacement_candidates(&token.lemma, pos)
                .into_iter()
                .filter(|c| single_word(c) && !db.shares_synset(&token.lemma, c, pos))
                .map(|c| {
                    let form = inflect(&c, tag, token.features);
                    (c, form)
                })
                .collect()
        }
    };
    raw.into_iter()
        .filter(|(_, form)| single_word(form))
        .map(|(lemma, form)| Choice {
            lemma,
            surface: transfer_casing(&token.surface, &form),
        })
        .filter(|c| c.surface.to_lowercase() != lower)
        .collect()
}

/// Replaces one word. The site is drawn uniformly among editable tokens that
/// have at least one candidate; the candidate is drawn with probability
/// proportional to its corpus count, unseen words counting once. The count
/// of a candidate is that of its lemma or of its inflected form, whichever
/// is larger, since the table holds surface forms.
pub fn gen_replace(
    parsed: &ParsedCaption,
    db: &WordNetDB,
    freq: &FrequencyTable,
    seed: u64,
) -> Option<NegativeCaption> {
    let lex = Lexicon::builtin();
    let sites: Vec<Site> = replace_sites(parsed, lex)
        .into_iter()
        .map(|(token, kind)| Site {
            token,
            kind,
            choices: choices(&parsed.tokens[token], kind, db, lex),
        })
        .filter(|s| !s.choices.is_empty())
        .collect();

    let mut rng = rng(seed);
    let site = sites.choose(&mut rng)?;
    let weights: Vec<u64> = site
        .choices
        .iter()
        .map(|c| freq.count(&c.lemma).max(freq.count(&c.surface.to_lowercase())).max(1))
        .collect();
    let pick = &site.choices[WeightedIndex::new(&weights).ok()?.sample(&mut rng)];

    let token = &parsed.tokens[site.token];
    let edit = Edit::substitute(token.span, &token.surface, pick.surface.clone());
    let source = match site.kind {
        SiteKind::WordNet(_) => "wordnet",
        SiteKind::Preposition => "prepositions",
    };
    finish(parsed, Strategy::Replace, vec![edit], seed, source.to_string())
}

fn swap_edits(tokens: &[Token], i: usize, j: usize) -> Vec<Edit> {
    let (a, b) = (&tokens[i], &tokens[j]);
    vec![
        Edit::substitute(a.span, &a.surface, transfer_casing(&a.surface, &b.surface)),
        Edit::substitute(b.span, &b.surface, transfer_casing(&b.surface, &a.surface)),
    ]
}

fn distinct(tokens: &[Token], i: usize, j: usize) -> bool {
    tokens[i].lower() != tokens[j].lower()
}

/// Exchanges two entity heads, or two attributes of different entities.
pub fn gen_swap(parsed: &ParsedCaption, seed: u64) -> Option<NegativeCaption> {
    let tokens = &parsed.tokens;
    let entities = &parsed.graph.entities;
    let mut pairs: Vec<(usize, usize, &str)> = Vec::new();
    for (x, ex) in entities.iter().enumerate() {
        for ey in &entities[x + 1..] {
            if distinct(tokens, ex.head, ey.head) {
                pairs.push((ex.head, ey.head, "entity-heads"));
            }
            for &a in &ex.attributes {
                for &b in &ey.attributes {
                    if distinct(tokens, a, b) {
                        pairs.push((a, b, "attributes"));
                    }
                }
            }
        }
    }
    let &(i, j, source) = pairs.choose(&mut rng(seed))?;
    finish(parsed, Strategy::Swap, swap_edits(tokens, i, j), seed, source.to_string())
}

const NEGATION_WORDS: [&str; 4] = ["not", "n't", "no", "never"];

/// Inserts "not" before a relation predicate (after its auxiliary, when it
/// opens with one) or turns an entity's a/an/the into "no".
pub fn gen_negate(parsed: &ParsedCaption, seed: u64) -> Option<NegativeCaption> {
    let lex = Lexicon::builtin();
    let tokens = &parsed.tokens;
    let entities = &parsed.graph.entities;
    let mut sites: Vec<(Edit, &str)> = Vec::new();

    for relation in &parsed.graph.relations {
        let between = entities[relation.subject].end..entities[relation.object].start;
        if tokens[between].iter().any(|t| NEGATION_WORDS.contains(&t.lower().as_str())) {
            continue;
        }
        let first = relation.predicate[0];
        let at = if tokens[first].pos == Tag::Verb && lex.is_auxiliary(&tokens[first].lemma) {
            first + 1
        } else {
            first
        };
        if at < tokens.len() {
            sites.push((Edit::insert(tokens[at].span.start, "not"), "predicate"));
        }
    }
    for entity in entities {
        if let Some(d) = entity.determiner {
            let det = &tokens[d];
            if matches!(det.lower().as_str(), "a" | "an" | "the") {
                let edit = Edit::substitute(det.span, &det.surface, transfer_casing(&det.surface, "no"));
                sites.push((edit, "determiner"));
            }
        }
    }
    let (edit, source) = sites.choose(&mut rng(seed))?.clone();
    finish(parsed, Strategy::Negate, vec![edit], seed, source.to_string())
}

/// Exchanges two same-tag words: nouns if any pair exists, else adjectives,
/// else verbs.
pub fn gen_shuffle(parsed: &ParsedCaption, seed: u64) -> Option<NegativeCaption> {
    let tokens = &parsed.tokens;
    for tag in [Tag::Noun, Tag::Adj, Tag::Verb] {
        let idx: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i].pos == tag).collect();
        let mut pairs = Vec::new();
        for (x, &i) in idx.iter().enumerate() {
            for &j in &idx[x + 1..] {
                if distinct(tokens, i, j) {
                    pairs.push((i, j));
                }
            }
        }
        if let Some(&(i, j)) = pairs.choose(&mut rng(seed)) {
            let source = format!("same-pos-swap:{}", tag.as_str());
            return finish(parsed, Strategy::Shuffle, swap_edits(tokens, i, j), seed, source);
        }
    }
    None
}
