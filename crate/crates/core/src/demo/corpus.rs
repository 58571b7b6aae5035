use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::datapipe::CaptionRecord;
use crate::evalharness::{ChoiceItem, ClassItem, Label};

pub const NOUNS: [&str; 20] = [
    "dog", "cat", "horse", "cow", "sheep", "goat", "pig", "lion", "tiger", "wolf", "fox", "bear", "rabbit", "mouse",
    "deer", "duck", "owl", "frog", "snake", "zebra",
];
pub const RELATIONS: [&str; 5] = ["chases", "watches", "follows", "pushes", "bites"];
/// Subject slot, relation slot, object slot.
pub const D_IMG: usize = NOUNS.len() * 2 + RELATIONS.len();

pub const RECOGNITION_TEMPLATE: &str = "a photo of a {}";

/// Who does what to whom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
}

impl Triple {
    pub fn caption(&self) -> String {
        format!("a {} {} a {}", NOUNS[self.subject], RELATIONS[self.relation], NOUNS[self.object])
    }

    /// Same words, arguments exchanged.
    pub fn swapped_caption(&self) -> String {
        Triple {
            subject: self.object,
            object: self.subject,
            ..*self
        }
        .caption()
    }

    /// `one-hot(subject) ‖ one-hot(relation) ‖ one-hot(object)` plus noise.
    pub fn features(&self, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let mut x = vec![0.0; D_IMG];
        x[self.subject] = 1.0;
        x[NOUNS.len() + self.relation] = 1.0;
        x[NOUNS.len() + RELATIONS.len() + self.object] = 1.0;
        add_noise(x, noise, rng)
    }
}

fn add_noise(x: Vec<f64>, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f32> {
    x.into_iter().map(|v| (v + noise.sample(rng)) as f32).collect()
}

/// One noun in either the subject or the object slot, nothing else.
pub fn object_features(noun: usize, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut x = vec![0.0; D_IMG];
    let slot = if rng.random_bool(0.5) { 0 } else { NOUNS.len() + RELATIONS.len() };
    x[slot + noun] = 1.0;
    add_noise(x, noise, rng)
}

pub fn object_caption(noun: usize) -> String {
    RECOGNITION_TEMPLATE.replace("{}", NOUNS[noun])
}

/// Every triple with distinct arguments, shuffled by `seed` and split into
/// training and held-out parts.
pub fn split_triples(seed: u64, held_out_fraction: f64) -> (Vec<Triple>, Vec<Triple>) {
    let mut all = Vec::new();
    for subject in 0..NOUNS.len() {
        for relation in 0..RELATIONS.len() {
            for object in 0..NOUNS.len() {
                if subject != object {
                    all.push(Triple { subject, relation, object });
                }
            }
        }
    }
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = ((all.len() as f64) * held_out_fraction).round() as usize;
    let train = all.split_off(held);
    (train, all)
}

/// Single-object records for pre-training.
pub fn stage_a_records(count: usize, noise: f64, seed: u64) -> Vec<CaptionRecord> {
    let noise = Normal::new(0.0, noise).expect("non-negative noise");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let noun = i % NOUNS.len();
            let mut r = CaptionRecord::new(format!("a{i:05}"), object_caption(noun));
            r.image_features = Some(object_features(noun, &noise, &mut rng));
            r
        })
        .collect()
}

/// Triple records cycling through `triples`.
pub fn triple_records(triples: &[Triple], count: usize, noise: f64, seed: u64) -> Vec<CaptionRecord> {
    let noise = Normal::new(0.0, noise).expect("non-negative noise");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = triples[i % triples.len()];
            let mut r = CaptionRecord::new(format!("t{i:05}"), t.caption());
            r.image_features = Some(t.features(&noise, &mut rng));
            r
        })
        .collect()
}

/// 20-way classification items over single-object images.
pub fn recognition_items(per_class: usize, noise: f64, seed: u64) -> Vec<ClassItem> {
    let noise = Normal::new(0.0, noise).expect("non-negative noise");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..per_class * NOUNS.len())
        .map(|i| {
            let noun = i % NOUNS.len();
            ClassItem {
                image_features: object_features(noun, &noise, &mut rng),
                label: Label::Index(noun),
            }
        })
        .collect()
}

/// Caption-choice items: the caption against its argument swap.
pub fn order_items(triples: &[Triple], noise: f64, seed: u64) -> Vec<ChoiceItem> {
    let noise = Normal::new(0.0, noise).expect("non-negative noise");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples
        .iter()
        .map(|t| ChoiceItem {
            image_features: t.features(&noise, &mut rng),
            positive: t.caption(),
            negatives: vec![t.swapped_caption()],
            group: Some(RELATIONS[t.relation].to_string()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        assert_eq!(D_IMG, 45);
        let (train, held) = split_triples(1, 0.2);
        assert_eq!(train.len() + held.len(), 20 * 19 * 5);
        assert_eq!(held.len(), 380);
        let t = Triple {
            subject: 0,
            relation: 0,
            object: 1,
        };
        assert_eq!(t.caption(), "a dog chases a cat");
        assert_eq!(t.swapped_caption(), "a cat chases a dog");
        let zero = Normal::new(0.0, 0.0).unwrap();
        let x = t.features(&zero, &mut ChaCha8Rng::seed_from_u64(0));
        let hot: Vec<usize> = x.iter().enumerate().filter(|(_, v)| **v == 1.0).map(|(i, _)| i).collect();
        assert_eq!(hot, [0, 20, 26]);
    }
}
