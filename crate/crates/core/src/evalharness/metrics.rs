use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// How classification accuracy is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMetric {
    Top1,
    MeanPerClass,
}

impl ClassMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassMetric::Top1 => "top1",
            ClassMetric::MeanPerClass => "mean_per_class",
        }
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Predicted class per image: argmax of cosine similarity against the class
/// embeddings (rows).
pub fn predict(class_embeddings: ArrayView2<f64>, image_embeddings: ArrayView2<f64>) -> Vec<usize> {
    let sims = image_embeddings.dot(&class_embeddings.t());
    sims.rows().into_iter().map(argmax).collect()
}

/// Accuracy of `predictions` against `labels` under `metric`. Classes with
/// no items do not enter the per-class mean.
pub fn accuracy(predictions: &[usize], labels: &[usize], classes: usize, metric: ClassMetric) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    match metric {
        ClassMetric::Top1 => {
            let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
            hits as f64 / labels.len() as f64
        }
        ClassMetric::MeanPerClass => {
            let mut seen = vec![0usize; classes];
            let mut hit = vec![0usize; classes];
            for (&p, &l) in predictions.iter().zip(labels) {
                seen[l] += 1;
                hit[l] += (p == l) as usize;
            }
            let per: Vec<f64> = seen.iter().zip(&hit).filter(|(s, _)| **s > 0).map(|(&s, &h)| h as f64 / s as f64).collect();
            per.iter().sum::<f64>() / per.len() as f64
        }
    }
}

/// Rank (0-based) of candidate `target` among `sims`: strictly better
/// candidates plus equal ones with a lower index.
pub fn rank_of(sims: ArrayView1<f64>, target: usize) -> usize {
    let t = sims[target];
    sims.iter()
        .enumerate()
        .filter(|&(j, &s)| s > t || (s == t && j < target))
        .count()
}

/// Recall@K in both directions for paired rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    pub text_to_image: f64,
    pub image_to_text: f64,
}

/// Item `i`'s image matches item `i`'s text.
pub fn recall_at_k(image_embeddings: ArrayView2<f64>, text_embeddings: ArrayView2<f64>, k: usize) -> Recall {
    let ranks = paired_ranks(image_embeddings, text_embeddings);
    recall_from_ranks(&ranks, k)
}

/// Ranks of every true match: `(text→image, image→text)` per item.
pub fn paired_ranks(image_embeddings: ArrayView2<f64>, text_embeddings: ArrayView2<f64>) -> Vec<(usize, usize)> {
    let sims: Array2<f64> = image_embeddings.dot(&text_embeddings.t());
    (0..sims.nrows())
        .map(|i| (rank_of(sims.column(i), i), rank_of(sims.row(i), i)))
        .collect()
}

pub fn recall_from_ranks(ranks: &[(usize, usize)], k: usize) -> Recall {
    let n = ranks.len().max(1) as f64;
    Recall {
        text_to_image: ranks.iter().filter(|r| r.0 < k).count() as f64 / n,
        image_to_text: ranks.iter().filter(|r| r.1 < k).count() as f64 / n,
    }
}

/// Caption-choice accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScores {
    pub micro: f64,
    pub per_group: BTreeMap<String, f64>,
    pub macro_average: f64,
}

/// An item counts as correct when its positive similarity strictly exceeds
/// every negative's.
pub fn choice_correct(positive: f64, negatives: &[f64]) -> bool {
    negatives.iter().all(|&n| positive > n)
}

pub fn choice_scores<'a>(outcomes: impl IntoIterator<Item = (&'a str, bool)>) -> ChoiceScores {
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut total, mut hits) = (0usize, 0usize);
    for (group, ok) in outcomes {
        let g = groups.entry(group.to_string()).or_default();
        g.0 += 1;
        g.1 += ok as usize;
        total += 1;
        hits += ok as usize;
    }
    let per_group: BTreeMap<String, f64> = groups.into_iter().map(|(k, (n, h))| (k, h as f64 / n as f64)).collect();
    let macro_average = if per_group.is_empty() {
        0.0
    } else {
        per_group.values().sum::<f64>() / per_group.len() as f64
    };
    ChoiceScores {
        micro: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
        per_group,
        macro_average,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accuracy_definitions() {
        let labels: Vec<usize> = [0; 9].into_iter().chain([1]).collect();
        let preds = vec![0; 10];
        assert!((accuracy(&preds, &labels, 2, ClassMetric::Top1) - 0.9).abs() < 1e-12);
        assert!((accuracy(&preds, &labels, 2, ClassMetric::MeanPerClass) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        assert_eq!(argmax(array![0.2, 0.5, 0.5].view()), 1);
        let classes = array![[1.0, 0.0], [1.0, 0.0]];
        let images = array![[1.0, 0.0]];
        assert_eq!(predict(classes.view(), images.view()), vec![0]);
    }

    #[test]
    fn orthogonal_classes_are_recovered() {
        let eye = Array2::<f64>::eye(4);
        let preds = predict(eye.view(), eye.view());
        assert_eq!(accuracy(&preds, &[0, 1, 2, 3], 4, ClassMetric::Top1), 1.0);
    }

    #[test]
    fn identity_embeddings_give_perfect_recall_at_1() {
        let eye = Array2::<f64>::eye(6);
        let r = recall_at_k(eye.view(), eye.view(), 1);
        assert_eq!((r.text_to_image, r.image_to_text), (1.0, 1.0));
    }

    #[test]
    fn k_beyond_item_count_is_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
        let b = Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0));
        let r = recall_at_k(a.view(), b.view(), 5);
        assert_eq!((r.text_to_image, r.image_to_text), (1.0, 1.0));
    }

    #[test]
    fn strict_choice_and_group_means() {
        assert!(!choice_correct(0.5, &[0.5]));
        assert!(choice_correct(0.5, &[0.4, 0.49]));
        let outcomes = (0..10).map(|_| ("a", true)).chain((0..90).map(|_| ("b", false)));
        let s = choice_scores(outcomes);
        assert!((s.micro - 0.10).abs() < 1e-12);
        assert!((s.macro_average - 0.50).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recall_is_monotone_in_k(seed in 0u64..1000, n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
            let b = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
            let ranks = paired_ranks(a.view(), b.view());
            let mut prev = recall_from_ranks(&ranks, 0);
            for k in 1..=n + 1 {
                let r = recall_from_ranks(&ranks, k);
                prop_assert!(r.text_to_image >= prev.text_to_image && r.image_to_text >= prev.image_to_text);
                prop_assert!((0.0..=1.0).contains(&r.text_to_image) && (0.0..=1.0).contains(&r.image_to_text));
                prev = r;
            }
        }

        #[test]
        fn argmax_survives_positive_rescaling(values in prop::collection::vec(-1.0f64..1.0, 1..20), scale in 0.01f64..100.0) {
            let v = ndarray::Array1::from(values);
            let scaled = v.mapv(|x| x * scale);
            prop_assert_eq!(argmax(v.view()), argmax(scaled.view()));
        }

        #[test]
        fn micro_ignores_group_labels(outcomes in prop::collection::vec((0u8..4, any::<bool>()), 1..60)) {
            let names = ["a", "b", "c", "d"];
            let grouped = choice_scores(outcomes.iter().map(|(g, ok)| (names[*g as usize], *ok)));
            let flat = choice_scores(outcomes.iter().map(|(_, ok)| ("all", *ok)));
            prop_assert!((grouped.micro - flat.micro).abs() < 1e-12);
            let mean = grouped.per_group.values().sum::<f64>() / grouped.per_group.len() as f64;
            prop_assert!((grouped.macro_average - mean).abs() < 1e-12);
        }
    }
}
