use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::NegativesError;
use crate::textproc::tokenize;

/// Lowercase unigram counts over a caption corpus, punctuation excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn from_captions<I, S>(captions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = FrequencyTable::default();
        for caption in captions {
            for token in tokenize(caption.as_ref()) {
                if !token.is_punct() {
                    table.add(&token.lower(), 1);
                }
            }
        }
        table
    }

    /// Adds `n` occurrences of `word`. Zero counts are never stored.
    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(word.to_lowercase()).or_insert(0) += n;
        self.total += n;
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries by descending count, then word.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut rows: Vec<(&str, u64)> = self.counts.iter().map(|(w, c)| (w.as_str(), *c)).collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows
    }

    /// `word<TAB>count` lines in [`FrequencyTable::sorted`] order.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        for (word, count) in self.sorted() {
            writeln!(out, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv(input: impl BufRead) -> Result<Self, NegativesError> {
        let mut table = FrequencyTable::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| NegativesError::FrequencyLine {
                line: i + 1,
                msg: msg.to_string(),
            };
            let (word, count) = line.split_once('\t').ok_or_else(|| bad("expected word<TAB>count"))?;
            let count: u64 = count.trim().parse().map_err(|_| bad("count is not an integer"))?;
            if count == 0 {
                return Err(bad("zero count"));
            }
            table.add(word, count);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_two_captions() {
        let t = FrequencyTable::from_captions(["a cat", "a dog"]);
        assert_eq!(t.count("a"), 2);
        assert_eq!(t.count("cat"), 1);
        assert_eq!(t.count("dog"), 1);
        assert_eq!(t.total(), 4);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn empty_stream() {
        let t = FrequencyTable::from_captions(Vec::<String>::new());
        assert!(t.is_empty());
        assert_eq!(t.total(), 0);
    }

    #[test]
    fn punctuation_and_case() {
        let t = FrequencyTable::from_captions(["A Dog, a dog."]);
        assert_eq!(t.count("a"), 2);
        assert_eq!(t.count("dog"), 2);
        assert_eq!(t.total(), 4);
    }

    #[test]
    fn tsv_is_sorted_and_round_trips() {
        let t = FrequencyTable::from_captions(["b a a", "c b a"]);
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a\t3\nb\t2\nc\t1\n");
        assert_eq!(FrequencyTable::read_tsv(&buf[..]).unwrap(), t);
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = FrequencyTable::read_tsv("a\t1\nb 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, NegativesError::FrequencyLine { line: 2, .. }));
        assert!(FrequencyTable::read_tsv("a\t0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn total_is_sum_of_counts(captions in prop::collection::vec("[a-c ,.]{0,12}", 0..8)) {
            let t = FrequencyTable::from_captions(&captions);
            let sum: u64 = t.sorted().iter().map(|(_, c)| c).sum();
            prop_assert_eq!(sum, t.total());
            prop_assert!(t.sorted().iter().all(|(_, c)| *c > 0));
        }
    }
}
