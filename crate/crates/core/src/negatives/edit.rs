use serde::{Deserialize, Serialize};

use crate::textproc::Span;

/// One change to the source caption. An empty span with an empty `original`
/// is an insertion before `span.start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub span: Span,
    pub original: String,
    pub replacement: String,
}

impl Edit {
    pub fn substitute(span: Span, original: &str, replacement: String) -> Self {
        Edit {
            span,
            original: original.to_string(),
            replacement,
        }
    }

    pub fn insert(at: usize, word: &str) -> Self {
        Edit {
            span: Span::new(at, at),
            original: String::new(),
            replacement: word.to_string(),
        }
    }

    pub fn is_insertion(&self) -> bool {
        self.span.start == self.span.end
    }
}

/// Applies non-overlapping edits to `caption`, keeping the original spacing.
/// Insertions add the word followed by a space.
pub fn apply_edits(caption: &str, edits: &[Edit]) -> String {
    let mut sorted: Vec<&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| (e.span.start, e.span.end));
    let mut out = String::with_capacity(caption.len() + 8);
    let mut cursor = 0;
    for edit in sorted {
        assert!(edit.span.start >= cursor, "overlapping edits");
        out.push_str(&caption[cursor..edit.span.start]);
        out.push_str(&edit.replacement);
        if edit.is_insertion() {
            out.push(' ');
        }
        cursor = edit.span.end;
    }
    out.push_str(&caption[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_and_insertion() {
        let caption = "a man riding a horse";
        let edits = [
            Edit::substitute(Span::new(15, 20), "horse", "camel".into()),
            Edit::insert(6, "not"),
        ];
        assert_eq!(apply_edits(caption, &edits), "a man not riding a camel");
    }

    #[test]
    fn no_edits_is_identity() {
        assert_eq!(apply_edits("a  dog .", &[]), "a  dog .");
    }
}
