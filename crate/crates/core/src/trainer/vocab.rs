use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::TrainError;
use crate::textproc::tokenize;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

/// Lowercase word vocabulary. Id 0 pads empty captions, id 1 stands for
/// unknown words; punctuation is dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Vocabulary over the given words, sorted after the two reserved ids.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        let words = ["<pad>".to_string(), "<unk>".to_string()]
            .into_iter()
            .chain(set.into_iter().filter(|w| w != "<pad>" && w != "<unk>"))
            .collect();
        Self::from_list(words)
    }

    fn from_list(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocab { words, index }
    }

    /// Every word of the captions.
    pub fn from_captions<I, S>(captions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words = BTreeSet::new();
        for c in captions {
            for t in tokenize(c.as_ref()) {
                if !t.is_punct() {
                    words.insert(t.lower());
                }
            }
        }
        Self::from_words(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(&word.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, caption: &str) -> Vec<u32> {
        tokenize(caption)
            .iter()
            .filter(|t| !t.is_punct())
            .map(|t| self.id(&t.surface))
            .collect()
    }

    /// One word per line, in id order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let mut text = self.words.join("\n");
        text.push('\n');
        std::fs::write(path.as_ref(), text).map_err(|e| TrainError::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TrainError::io(path.as_ref(), e))?;
        let words: Vec<String> = text.lines().map(str::to_string).collect();
        if words.len() < 2 || words[0] != "<pad>" || words[1] != "<unk>" {
            return Err(TrainError::Format(format!(
                "{}: vocabulary must start with <pad> and <unk>",
                path.as_ref().display()
            )));
        }
        Ok(Self::from_list(words))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_and_encoding() {
        let v = Vocab::from_captions(["A dog chases a cat.", "a cat"]);
        assert_eq!(v.word(0), Some("<pad>"));
        assert_eq!(v.word(1), Some("<unk>"));
        assert_eq!(v.len(), 2 + 4);
        let ids = v.encode("A cat chases a zebra !");
        assert_eq!(ids.len(), 5);
        assert_eq!(ids[0], ids[3]);
        assert_eq!(ids[4], UNK);
        assert!(v.encode("").is_empty());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocab::from_words(["b", "a"]);
        v.save(&path).unwrap();
        assert_eq!(Vocab::load(&path).unwrap(), v);
        std::fs::write(&path, "a\nb\n").unwrap();
        assert!(Vocab::load(&path).is_err());
    }
}
