use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gen_negate, gen_replace, gen_shuffle, gen_swap, FrequencyTable, NegativeCaption, NegativesError, Strategy};
use crate::textproc::ParsedCaption;
use crate::wordnet::WordNetDB;

/// Which strategies to try, how often, and how many negatives to keep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub strategies: Vec<Strategy>,
    /// One positive weight per strategy.
    pub weights: Vec<f64>,
    pub per_caption: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig::uniform(&Strategy::ALL)
    }
}

impl GenerateConfig {
    pub fn uniform(strategies: &[Strategy]) -> Self {
        GenerateConfig {
            strategies: strategies.to_vec(),
            weights: vec![1.0; strategies.len()],
            per_caption: 1,
        }
    }

    pub fn validate(&self) -> Result<(), NegativesError> {
        if self.strategies.len() != self.weights.len() {
            return Err(NegativesError::Config(format!(
                "{} strategies but {} weights",
                self.strategies.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(NegativesError::Config(format!("weight {w} is not positive")));
        }
        Ok(())
    }
}

fn run(
    strategy: Strategy,
    parsed: &ParsedCaption,
    db: &WordNetDB,
    freq: &FrequencyTable,
    seed: u64,
) -> Option<NegativeCaption> {
    match strategy {
        Strategy::Replace => gen_replace(parsed, db, freq, seed),
        Strategy::Swap => gen_swap(parsed, seed),
        Strategy::Negate => gen_negate(parsed, seed),
        Strategy::Shuffle => gen_shuffle(parsed, seed),
    }
}

/// Parses `caption` and calls [`generate_parsed`].
pub fn generate(
    caption: &str,
    config: &GenerateConfig,
    seed: u64,
    db: &WordNetDB,
    freq: &FrequencyTable,
) -> Vec<NegativeCaption> {
    generate_parsed(&ParsedCaption::parse(caption, db), config, seed, db, freq)
}

/// Up to `per_caption` distinct negatives. Each round orders the strategies
/// by weighted draws without replacement and keeps the first new result;
/// every attempt gets its own sub-seed from the caption seed.
///
/// # Panics
///
/// If the config does not pass [`GenerateConfig::validate`].
pub fn generate_parsed(
    parsed: &ParsedCaption,
    config: &GenerateConfig,
    seed: u64,
    db: &WordNetDB,
    freq: &FrequencyTable,
) -> Vec<NegativeCaption> {
    config.validate().expect("valid generator config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<NegativeCaption> = Vec::new();

    for _ in 0..config.per_caption {
        let mut remaining: Vec<(Strategy, f64)> =
            config.strategies.iter().copied().zip(config.weights.iter().copied()).collect();
        let mut produced = false;
        while !remaining.is_empty() {
            let weights: Vec<f64> = remaining.iter().map(|(_, w)| *w).collect();
            let k = WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng);
            let (strategy, _) = remaining.remove(k);
            let sub_seed = rng.next_u64();
            if let Some(neg) = run(strategy, parsed, db, freq, sub_seed) {
                if out.iter().all(|n| n.text != neg.text) {
                    out.push(neg);
                    produced = true;
                    break;
                }
            }
        }
        if !produced {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wordnet::{bundled, PartOfSpeech, WordNetBuilder};

    #[test]
    fn replace_only_config() {
        let db = bundled();
        let config = GenerateConfig::uniform(&[Strategy::Replace]);
        let negs = generate("a dog chases a cat", &config, 7, db, &FrequencyTable::default());
        assert_eq!(negs.len(), 1);
        assert_eq!(negs[0].strategy, Strategy::Replace);
    }

    #[test]
    fn deterministic_per_seed() {
        let db = bundled();
        let freq = FrequencyTable::from_captions(["a dog chases a cat", "a horse on the grass"]);
        let config = GenerateConfig {
            per_caption: 3,
            ..GenerateConfig::default()
        };
        let a = generate("a red dog chases a small cat on the grass", &config, 11, db, &freq);
        let b = generate("a red dog chases a small cat on the grass", &config, 11, db, &freq);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len(), 3);
        let c = generate("a red dog chases a small cat on the grass", &config, 12, db, &freq);
        assert_ne!(a, c);
    }

    #[test]
    fn nothing_applicable() {
        let mut b = WordNetBuilder::new();
        b.add_synset(PartOfSpeech::Noun, &["sunset"]);
        let db = b.build().unwrap();
        let negs = generate("sunset", &GenerateConfig::default(), 1, &db, &FrequencyTable::default());
        assert!(negs.is_empty());
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = GenerateConfig::default();
        c.weights[0] = 0.0;
        assert!(c.validate().is_err());
        c.weights.pop();
        assert!(c.validate().is_err());
    }
}
