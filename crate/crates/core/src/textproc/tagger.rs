//! Lexicon plus rule tagger.
//!
//! Closed-class words come from the built-in lexicon. Open-class words are
//! tagged by which WordNet indexes know them (ties go NOUN > VERB > ADJ >
//! ADV), with suffix overrides (`-ly`, `-ing`, `-ed`) and a few local context
//! rules that look one token left and right: attributive adjectives before a
//! noun, verbs after a subject, predicate adjectives after a copula.

use super::lexicon::{Lexicon, VerbSlot};
use super::morph::{base_form, infer_features, lemmatize};
use super::{Number, Tag, Token};
use crate::wordnet::{PartOfSpeech, WordNetDB};

#[derive(Debug, Default, Clone)]
struct Candidates {
    noun: Option<String>,
    verb: Option<String>,
    adj: Option<String>,
    adv: Option<String>,
}

impl Candidates {
    fn is_empty(&self) -> bool {
        self.noun.is_none() && self.verb.is_none() && self.adj.is_none() && self.adv.is_none()
    }

    /// Verb reading that is an inflected form rather than the base.
    fn inflected_verb(&self, lower: &str) -> bool {
        match &self.verb {
            Some(lemma) => lemma != lower,
            None => false,
        }
    }

    fn default_tag(&self) -> Tag {
        if self.noun.is_some() {
            Tag::Noun
        } else if self.verb.is_some() {
            Tag::Verb
        } else if self.adj.is_some() {
            Tag::Adj
        } else {
            Tag::Adv
        }
    }
}

#[derive(Debug, Clone)]
enum Class {
    Punct,
    Digits,
    Closed(Tag),
    AdpOrAdv,
    To,
    Open(Candidates),
}

pub struct Tagger<'a> {
    db: &'a WordNetDB,
    lex: &'static Lexicon,
}

fn is_title_case(s: &str) -> bool {
    let mut letters = s.chars().filter(|c| c.is_alphabetic());
    match letters.next() {
        Some(first) if first.is_uppercase() => {
            let rest: Vec<char> = letters.collect();
            !rest.is_empty() && rest.iter().any(|c| c.is_lowercase())
        }
        _ => false,
    }
}

impl<'a> Tagger<'a> {
    pub fn new(db: &'a WordNetDB) -> Self {
        Tagger {
            db,
            lex: Lexicon::builtin(),
        }
    }

    pub fn db(&self) -> &'a WordNetDB {
        self.db
    }

    fn candidates(&self, lower: &str) -> Candidates {
        Candidates {
            noun: base_form(lower, PartOfSpeech::Noun, self.db),
            verb: base_form(lower, PartOfSpeech::Verb, self.db),
            adj: base_form(lower, PartOfSpeech::Adjective, self.db),
            adv: base_form(lower, PartOfSpeech::Adverb, self.db),
        }
    }

    fn classify(&self, token: &Token) -> Class {
        let lower = token.lower();
        if token.is_punct() {
            return Class::Punct;
        }
        if token.surface.chars().all(|c| c.is_ascii_digit()) {
            return Class::Digits;
        }
        if lower == "to" {
            return Class::To;
        }
        if self.lex.is_adp_or_adv(&lower) {
            return Class::AdpOrAdv;
        }
        if let Some(tag) = self.lex.closed_tag(&lower) {
            return Class::Closed(tag);
        }
        Class::Open(self.candidates(&lower))
    }

    /// Assigns a tag, lemma and features to every token. Pure: the output
    /// depends only on the surfaces and the database.
    pub fn tag(&self, tokens: &[Token]) -> Vec<Token> {
        let classes: Vec<Class> = tokens.iter().map(|t| self.classify(t)).collect();
        let mut out: Vec<Token> = tokens.to_vec();
        let mut tags: Vec<Tag> = Vec::with_capacity(tokens.len());

        for i in 0..tokens.len() {
            let prev = if i == 0 { None } else { Some(tags[i - 1]) };
            let prev_plural = i > 0 && out[i - 1].features.number == Number::Plural;
            let tag = self.decide(i, tokens, &classes, prev, prev_plural);
            tags.push(tag);
            let t = &mut out[i];
            t.pos = tag;
            t.lemma = lemmatize(t, self.db);
            t.features = infer_features(&t.lower(), &t.lemma, tag);
        }
        out
    }

    fn starts_noun_phrase(&self, classes: &[Class], j: usize) -> bool {
        match classes.get(j) {
            Some(Class::Closed(tag)) => matches!(tag, Tag::Det | Tag::Num | Tag::Pron),
            Some(Class::Digits) => true,
            Some(Class::Open(c)) => c.noun.is_some() || c.adj.is_some() || c.is_empty(),
            _ => false,
        }
    }

    fn noun_capable(&self, classes: &[Class], j: usize) -> bool {
        match classes.get(j) {
            Some(Class::Open(c)) => c.noun.is_some() || c.is_empty(),
            _ => false,
        }
    }

    fn decide(&self, i: usize, tokens: &[Token], classes: &[Class], prev: Option<Tag>, prev_plural: bool) -> Tag {
        let token = &tokens[i];
        let lower = token.lower();
        let next_lower = tokens.get(i + 1).map(Token::lower);
        match &classes[i] {
            Class::Punct => Tag::Other,
            Class::Digits => Tag::Num,
            Class::Closed(tag) => *tag,
            Class::AdpOrAdv => {
                if self.starts_noun_phrase(classes, i + 1) {
                    Tag::Adp
                } else {
                    Tag::Adv
                }
            }
            // "to" before a base-form verb is the infinitive marker.
            Class::To => match (classes.get(i + 1), next_lower.as_deref()) {
                (Some(Class::Open(c)), Some(next)) if c.verb.as_deref() == Some(next) => Tag::Part,
                _ => Tag::Adp,
            },
            Class::Open(c) => {
                if i > 0 && is_title_case(&token.surface) && prev != Some(Tag::Other) {
                    return Tag::Propn;
                }
                self.decide_open(&lower, c, i, classes, prev, prev_plural)
            }
        }
    }

    fn decide_open(
        &self,
        lower: &str,
        c: &Candidates,
        i: usize,
        classes: &[Class],
        prev: Option<Tag>,
        prev_plural: bool,
    ) -> Tag {
        let next_noun = self.noun_capable(classes, i + 1);

        if c.is_empty() {
            return if lower.ends_with("ly") {
                Tag::Adv
            } else if lower.ends_with("ing") || lower.ends_with("ed") {
                Tag::Verb
            } else {
                Tag::Noun
            };
        }

        if lower.ends_with("ly") {
            if c.adv.is_some() {
                return Tag::Adv;
            }
            if c.adj.is_some() {
                return Tag::Adj;
            }
        }

        let in_noun_phrase = matches!(prev, Some(Tag::Det | Tag::Adj | Tag::Num));
        let irregular_past = matches!(
            self.lex.verb_forms.get(lower),
            Some((_, VerbSlot::Past | VerbSlot::Participle))
        );

        if (lower.ends_with("ing") || lower.ends_with("ed")) && c.inflected_verb(lower) {
            if in_noun_phrase {
                return if next_noun {
                    Tag::Adj
                } else if c.noun.is_some() {
                    Tag::Noun
                } else {
                    Tag::Verb
                };
            }
            return Tag::Verb;
        }

        match prev {
            Some(Tag::Det | Tag::Adj | Tag::Num) => {
                if c.adj.is_some() && next_noun {
                    Tag::Adj
                } else if c.noun.is_some() {
                    Tag::Noun
                } else {
                    c.default_tag()
                }
            }
            Some(Tag::Noun | Tag::Propn | Tag::Pron) if c.verb.is_some() => {
                if c.inflected_verb(lower) || irregular_past || prev == Some(Tag::Pron) || prev_plural {
                    Tag::Verb
                } else if c.noun.is_some() {
                    Tag::Noun
                } else {
                    Tag::Verb
                }
            }
            Some(Tag::Verb) => {
                if c.adj.is_some() && (next_noun || !self.starts_noun_phrase(classes, i + 1)) {
                    Tag::Adj
                } else {
                    c.default_tag()
                }
            }
            Some(Tag::Part) if c.verb.is_some() => Tag::Verb,
            _ => {
                if c.adj.is_some() && next_noun {
                    Tag::Adj
                } else {
                    c.default_tag()
                }
            }
        }
    }
}
