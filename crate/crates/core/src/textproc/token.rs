use serde::{Deserialize, Serialize};

/// Coarse part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Noun,
    Propn,
    Verb,
    Adj,
    Adv,
    /// Preposition.
    Adp,
    Det,
    Num,
    Conj,
    Pron,
    Part,
    #[default]
    Other,
}

impl Tag {
    pub fn parse(s: &str) -> Option<Tag> {
        Some(match s {
            "NOUN" => Tag::Noun,
            "PROPN" => Tag::Propn,
            "VERB" => Tag::Verb,
            "ADJ" => Tag::Adj,
            "ADV" => Tag::Adv,
            "ADP" => Tag::Adp,
            "DET" => Tag::Det,
            "NUM" => Tag::Num,
            "CONJ" => Tag::Conj,
            "PRON" => Tag::Pron,
            "PART" => Tag::Part,
            "OTHER" => Tag::Other,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Propn => "PROPN",
            Tag::Verb => "VERB",
            Tag::Adj => "ADJ",
            Tag::Adv => "ADV",
            Tag::Adp => "ADP",
            Tag::Det => "DET",
            Tag::Num => "NUM",
            Tag::Conj => "CONJ",
            Tag::Pron => "PRON",
            Tag::Part => "PART",
            Tag::Other => "OTHER",
        }
    }

    /// Tags whose words carry content (nouns, verbs, adjectives, adverbs).
    pub fn is_open_class(self) -> bool {
        matches!(self, Tag::Noun | Tag::Propn | Tag::Verb | Tag::Adj | Tag::Adv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Person {
    First,
    Second,
    Third,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Present,
    Past,
    Gerund,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Features {
    pub number: Number,
    pub person: Person,
    pub tense: Tense,
}

impl Features {
    pub fn plural() -> Self {
        Features {
            number: Number::Plural,
            ..Default::default()
        }
    }

    pub fn singular() -> Self {
        Features {
            number: Number::Singular,
            ..Default::default()
        }
    }

    pub fn tense(tense: Tense) -> Self {
        Features {
            tense,
            ..Default::default()
        }
    }

    pub fn third_person_present() -> Self {
        Features {
            person: Person::Third,
            tense: Tense::Present,
            ..Default::default()
        }
    }
}

/// Byte range `[start, end)` into the source caption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: Tag,
    pub features: Features,
    pub span: Span,
}

impl Token {
    pub fn lower(&self) -> String {
        self.surface.to_lowercase()
    }

    pub fn is_punct(&self) -> bool {
        !self.surface.chars().any(char::is_alphanumeric)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits on whitespace and punctuation. Every non-alphanumeric character
/// (hyphens included) becomes its own token; an apostrophe inside a word is
/// kept, except for a trailing `'s` clitic which is split off.
pub fn tokenize(caption: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = caption.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(caption.len(), |(b, _)| *b);
    let mut push = |start: usize, end: usize| {
        tokens.push(Token {
            surface: caption[start..end].to_string(),
            lemma: String::new(),
            pos: Tag::Other,
            features: Features::default(),
            span: Span::new(start, end),
        });
    };

    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !is_word_char(c) {
            push(start, end_of(i + 1));
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            let joins = is_word_char(c)
                || (c == '\'' && chars.get(j + 1).is_some_and(|(_, n)| is_word_char(*n)));
            if !joins {
                break;
            }
            j += 1;
        }
        let word_end = end_of(j);
        let word = &caption[start..word_end];
        let lower = word.to_lowercase();
        if lower.len() > 2 && lower.ends_with("'s") {
            let split = word_end - 2;
            push(start, split);
            push(split, word_end);
        } else {
            push(start, word_end);
        }
        i = j;
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn splitting_contract() {
        assert_eq!(surfaces("A red car."), ["A", "red", "car", "."]);
        assert!(surfaces("").is_empty());
        assert_eq!(surfaces("cat-dog"), ["cat", "-", "dog"]);
        assert_eq!(surfaces("the man's hat"), ["the", "man", "'s", "hat"]);
        assert_eq!(surfaces("don't  stop!"), ["don't", "stop", "!"]);
        assert_eq!(surfaces("café au lait"), ["café", "au", "lait"]);
    }

    #[test]
    fn spans_match_surfaces() {
        let caption = "  Two dogs, one  café-table.";
        let tokens = tokenize(caption);
        let mut last = 0;
        for t in &tokens {
            assert!(t.span.start >= last);
            assert!(t.span.start < t.span.end);
            assert_eq!(&caption[t.span.start..t.span.end], t.surface);
            last = t.span.end;
        }
    }
}
