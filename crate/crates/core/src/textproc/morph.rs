//! Lemmatization, inflection and casing transfer.

use super::lexicon::{Lexicon, VerbSlot};
use super::{Features, Number, Person, Tag, Tense, Token};
use crate::wordnet::{PartOfSpeech, WordNetDB};

/// WordNet part of speech for a coarse tag, when WordNet covers it.
pub fn wordnet_pos(tag: Tag) -> Option<PartOfSpeech> {
    match tag {
        Tag::Noun => Some(PartOfSpeech::Noun),
        Tag::Verb => Some(PartOfSpeech::Verb),
        Tag::Adj => Some(PartOfSpeech::Adjective),
        Tag::Adv => Some(PartOfSpeech::Adverb),
        _ => None,
    }
}

// Morphy detachment rules, in WordNet's order.
const NOUN_RULES: &[(&str, &str)] = &[
    ("s", ""),
    ("ses", "s"),
    ("xes", "x"),
    ("zes", "z"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("men", "man"),
    ("ies", "y"),
];
const VERB_RULES: &[(&str, &str)] = &[
    ("s", ""),
    ("ies", "y"),
    ("es", "e"),
    ("es", ""),
    ("ed", "e"),
    ("ed", ""),
    ("ing", "e"),
    ("ing", ""),
];
const ADJ_RULES: &[(&str, &str)] = &[("er", ""), ("est", ""), ("er", "e"), ("est", "e")];

fn rules(pos: PartOfSpeech) -> &'static [(&'static str, &'static str)] {
    match pos {
        PartOfSpeech::Noun => NOUN_RULES,
        PartOfSpeech::Verb => VERB_RULES,
        PartOfSpeech::Adjective => ADJ_RULES,
        PartOfSpeech::Adverb => &[],
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Base form of `word` as `pos`, if WordNet knows one: irregular table, the
/// word itself, morphy suffix rules, then undoing a doubled final consonant
/// (`running` -> `runn` -> `run`).
pub fn base_form(word: &str, pos: PartOfSpeech, db: &WordNetDB) -> Option<String> {
    let lower = word.to_lowercase();
    let lex = Lexicon::builtin();
    match pos {
        PartOfSpeech::Verb => {
            if let Some((lemma, _)) = lex.verb_forms.get(&lower) {
                return Some(lemma.clone());
            }
        }
        PartOfSpeech::Noun => {
            if let Some(singular) = lex.noun_singular.get(&lower) {
                return Some(singular.clone());
            }
        }
        _ => {}
    }
    if db.contains(&lower, pos) {
        return Some(lower);
    }
    for (suffix, replacement) in rules(pos) {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if stem.is_empty() {
                continue;
            }
            let candidate = format!("{stem}{replacement}");
            if db.contains(&candidate, pos) {
                return Some(candidate);
            }
            let bytes = stem.as_bytes();
            if replacement.is_empty() && bytes.len() >= 3 && bytes[bytes.len() - 1] == bytes[bytes.len() - 2] {
                let undoubled = &stem[..stem.len() - 1];
                if db.contains(undoubled, pos) {
                    return Some(undoubled.to_string());
                }
            }
        }
    }
    None
}

/// Lemma of a tagged token; falls back to the lowercased surface.
pub fn lemmatize(token: &Token, db: &WordNetDB) -> String {
    let lower = token.surface.to_lowercase();
    let lex = Lexicon::builtin();
    match token.pos {
        Tag::Verb => {
            if let Some((lemma, _)) = lex.verb_forms.get(&lower) {
                return lemma.clone();
            }
        }
        Tag::Noun => {
            if let Some(singular) = lex.noun_singular.get(&lower) {
                return singular.clone();
            }
        }
        _ => {}
    }
    wordnet_pos(token.pos)
        .and_then(|pos| base_form(&lower, pos, db))
        .unwrap_or(lower)
}

/// Morphological features implied by a surface form and its lemma.
pub fn infer_features(lower: &str, lemma: &str, tag: Tag) -> Features {
    let lex = Lexicon::builtin();
    match tag {
        Tag::Noun => {
            let plural = lex.noun_singular.contains_key(lower) && !lex.noun_plural.contains_key(lower)
                || (lower != lemma && lower.ends_with('s'));
            if plural {
                Features::plural()
            } else {
                Features::singular()
            }
        }
        Tag::Verb => {
            if let Some((_, slot)) = lex.verb_forms.get(lower) {
                return match slot {
                    VerbSlot::Third => Features::third_person_present(),
                    VerbSlot::Past | VerbSlot::Participle => Features::tense(Tense::Past),
                    VerbSlot::Gerund => Features::tense(Tense::Gerund),
                    VerbSlot::Base => Features::tense(Tense::Present),
                };
            }
            if lower == lemma {
                Features::tense(Tense::Present)
            } else if lower.ends_with("ing") {
                Features::tense(Tense::Gerund)
            } else if lower.ends_with("ed") {
                Features::tense(Tense::Past)
            } else if lower.ends_with('s') {
                Features::third_person_present()
            } else {
                Features::tense(Tense::Present)
            }
        }
        _ => Features::default(),
    }
}

fn ends_with_sibilant(word: &str) -> bool {
    ["s", "x", "z", "ch", "sh"].iter().any(|s| word.ends_with(s))
}

fn consonant_y(word: &str) -> bool {
    let mut rev = word.chars().rev();
    matches!((rev.next(), rev.next()), (Some('y'), Some(c)) if !is_vowel(c))
}

/// Single-syllable consonant-vowel-consonant words double the final
/// consonant before -ing/-ed (`run` -> `running`, `stop` -> `stopped`).
fn doubles_final(word: &str) -> bool {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n < 3 {
        return false;
    }
    let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
    if is_vowel(a) || !is_vowel(b) || is_vowel(c) || matches!(c, 'w' | 'x' | 'y') {
        return false;
    }
    let vowel_groups = chars
        .iter()
        .zip(std::iter::once(&' ').chain(chars.iter()))
        .filter(|(c, prev)| is_vowel(**c) && !is_vowel(**prev))
        .count();
    vowel_groups == 1
}

fn pluralize(lemma: &str) -> String {
    if let Some(p) = Lexicon::builtin().noun_plural.get(lemma) {
        return p.clone();
    }
    if consonant_y(lemma) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else if ends_with_sibilant(lemma) {
        format!("{lemma}es")
    } else {
        format!("{lemma}s")
    }
}

fn third_person(lemma: &str) -> String {
    if consonant_y(lemma) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else if ends_with_sibilant(lemma) || lemma.ends_with('o') {
        format!("{lemma}es")
    } else {
        format!("{lemma}s")
    }
}

fn past(lemma: &str) -> String {
    if lemma.ends_with('e') {
        format!("{lemma}d")
    } else if consonant_y(lemma) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else if doubles_final(lemma) {
        format!("{lemma}{}ed", &lemma[lemma.len() - 1..])
    } else {
        format!("{lemma}ed")
    }
}

fn gerund(lemma: &str) -> String {
    if let Some(stem) = lemma.strip_suffix("ie") {
        format!("{stem}ying")
    } else if lemma.ends_with('e') && !["ee", "ye", "oe"].iter().any(|s| lemma.ends_with(s)) && lemma.len() > 2 {
        format!("{}ing", &lemma[..lemma.len() - 1])
    } else if doubles_final(lemma) {
        format!("{lemma}{}ing", &lemma[lemma.len() - 1..])
    } else {
        format!("{lemma}ing")
    }
}

/// Surface form of `lemma` carrying `features`.
pub fn inflect(lemma: &str, pos: Tag, features: Features) -> String {
    let lemma = lemma.to_lowercase();
    let lex = Lexicon::builtin();
    match pos {
        Tag::Noun if features.number == Number::Plural => pluralize(&lemma),
        Tag::Verb => {
            let irregular = lex.verbs.get(&lemma);
            match features.tense {
                Tense::Past => irregular.map_or_else(|| past(&lemma), |f| f.past.clone()),
                Tense::Gerund => irregular.map_or_else(|| gerund(&lemma), |f| f.gerund.clone()),
                Tense::Present if features.person == Person::Third => {
                    irregular.map_or_else(|| third_person(&lemma), |f| f.third.clone())
                }
                _ => lemma,
            }
        }
        _ => lemma,
    }
}

fn letters(s: &str) -> impl Iterator<Item = char> + '_ {
    s.chars().filter(|c| c.is_alphabetic())
}

/// Gives `target` the casing pattern of `template`: all caps, title case, or
/// lowercase. A single capital letter counts as title case.
pub fn transfer_casing(template: &str, target: &str) -> String {
    let n_letters = letters(template).count();
    let all_caps = n_letters >= 2 && letters(template).all(char::is_uppercase);
    if all_caps {
        return target.to_uppercase();
    }
    if letters(template).next().is_some_and(char::is_uppercase) {
        let lower = target.to_lowercase();
        let mut chars = lower.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => lower,
        };
    }
    target.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wordnet::WordNetBuilder;

    fn db() -> WordNetDB {
        let mut b = WordNetBuilder::new();
        for n in ["cat", "dog", "box", "city", "bus", "man", "glasses", "church"] {
            b.add_synset(PartOfSpeech::Noun, &[n]);
        }
        for v in ["run", "stop", "carry", "make", "ride", "watch", "jump", "chase", "sit"] {
            b.add_synset(PartOfSpeech::Verb, &[v]);
        }
        b.add_synset(PartOfSpeech::Adjective, &["big"]);
        b.build().unwrap()
    }

    fn tok(surface: &str, pos: Tag) -> Token {
        Token {
            surface: surface.into(),
            lemma: String::new(),
            pos,
            features: Features::default(),
            span: crate::textproc::Span::new(0, surface.len()),
        }
    }

    #[test]
    fn lemmatize_examples() {
        let db = db();
        assert_eq!(lemmatize(&tok("running", Tag::Verb), &db), "run");
        assert_eq!(lemmatize(&tok("cats", Tag::Noun), &db), "cat");
        assert_eq!(lemmatize(&tok("quickly", Tag::Adv), &db), "quickly");
        assert_eq!(lemmatize(&tok("Boxes", Tag::Noun), &db), "box");
        assert_eq!(lemmatize(&tok("cities", Tag::Noun), &db), "city");
        assert_eq!(lemmatize(&tok("men", Tag::Noun), &db), "man");
        assert_eq!(lemmatize(&tok("ran", Tag::Verb), &db), "run");
        assert_eq!(lemmatize(&tok("glasses", Tag::Noun), &db), "glasses");
        assert_eq!(lemmatize(&tok("making", Tag::Verb), &db), "make");
        assert_eq!(lemmatize(&tok("stopped", Tag::Verb), &db), "stop");
    }

    #[test]
    fn inflect_examples() {
        assert_eq!(inflect("run", Tag::Verb, Features::third_person_present()), "runs");
        assert_eq!(inflect("child", Tag::Noun, Features::plural()), "children");
        assert_eq!(inflect("carry", Tag::Verb, Features::tense(Tense::Past)), "carried");
        assert_eq!(inflect("stop", Tag::Verb, Features::tense(Tense::Gerund)), "stopping");
        assert_eq!(inflect("make", Tag::Verb, Features::tense(Tense::Gerund)), "making");
        assert_eq!(inflect("see", Tag::Verb, Features::tense(Tense::Gerund)), "seeing");
        assert_eq!(inflect("tie", Tag::Verb, Features::tense(Tense::Gerund)), "tying");
        assert_eq!(inflect("visit", Tag::Verb, Features::tense(Tense::Past)), "visited");
        assert_eq!(inflect("watch", Tag::Verb, Features::third_person_present()), "watches");
        assert_eq!(inflect("box", Tag::Noun, Features::plural()), "boxes");
        assert_eq!(inflect("city", Tag::Noun, Features::plural()), "cities");
        assert_eq!(inflect("day", Tag::Noun, Features::plural()), "days");
        assert_eq!(inflect("dog", Tag::Noun, Features::singular()), "dog");
        assert_eq!(inflect("go", Tag::Verb, Features::tense(Tense::Past)), "went");
    }

    #[test]
    fn casing() {
        assert_eq!(transfer_casing("CAR", "bed"), "BED");
        assert_eq!(transfer_casing("Car", "bed"), "Bed");
        assert_eq!(transfer_casing("car", "Bed"), "bed");
        assert_eq!(transfer_casing("A", "no"), "No");
        assert_eq!(transfer_casing("a", "No"), "no");
    }

    #[test]
    fn regular_forms_round_trip() {
        let db = db();
        let cases = [
            ("dogs", Tag::Noun),
            ("cats", Tag::Noun),
            ("boxes", Tag::Noun),
            ("cities", Tag::Noun),
            ("churches", Tag::Noun),
            ("runs", Tag::Verb),
            ("running", Tag::Verb),
            ("stopped", Tag::Verb),
            ("stopping", Tag::Verb),
            ("carried", Tag::Verb),
            ("carries", Tag::Verb),
            ("making", Tag::Verb),
            ("made", Tag::Verb),
            ("rides", Tag::Verb),
            ("riding", Tag::Verb),
            ("watches", Tag::Verb),
            ("watched", Tag::Verb),
            ("jumping", Tag::Verb),
            ("jumped", Tag::Verb),
            ("chased", Tag::Verb),
            ("sitting", Tag::Verb),
            ("sat", Tag::Verb),
            ("men", Tag::Noun),
        ];
        for (surface, pos) in cases {
            let t = tok(surface, pos);
            let lemma = lemmatize(&t, &db);
            let features = infer_features(surface, &lemma, pos);
            assert_eq!(inflect(&lemma, pos, features), surface, "{surface} via {lemma}");
        }
    }

    proptest::proptest! {
        #[test]
        fn casing_is_idempotent(template in "[a-zA-Z]{0,6}", target in "[a-zA-Z]{1,6}") {
            let once = transfer_casing(&template, &target);
            proptest::prop_assert_eq!(transfer_casing(&template, &once), once);
        }
    }
}
