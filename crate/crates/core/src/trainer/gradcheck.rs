use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::params::{ModelConfig, TowerParams};
use super::train::{batch_gradients, batch_loss, Batch};
use super::TrainError;

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub tensors: Vec<String>,
    pub max_relative_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-8;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Random batch of `n` pairs with `m` negatives over `config`.
pub fn random_batch(config: &ModelConfig, n: usize, m: usize, rng: &mut ChaCha8Rng) -> Batch<f64> {
    let images = Array2::from_shape_simple_fn((n, config.d_img), || rng.random_range(-1.0..1.0));
    let seq = |rng: &mut ChaCha8Rng| -> Vec<u32> {
        let len = rng.random_range(1..6);
        (0..len).map(|_| rng.random_range(0..config.vocab_size as u32)).collect()
    };
    let texts = (0..n).map(|_| seq(rng)).collect();
    let negatives = (0..m).map(|_| seq(rng)).collect();
    Batch { images, texts, negatives }
}

/// Compares analytic gradients with central differences `(L(p+ε) − L(p−ε)) / 2ε`
/// on `samples` parameters drawn across every tensor, in double precision.
/// Embedding entries are drawn only from rows the batch uses.
pub fn gradient_check(config: &ModelConfig, seed: u64, samples: usize, eps: f64) -> Result<GradCheckReport, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = TowerParams::<f64>::init(config, seed)?;
    params.log_temperature[0] = 1.0;
    let batch = random_batch(config, 5, 3, &mut rng);
    let (_, grads) = batch_gradients(&params, &batch)?;

    let used_rows: BTreeSet<u32> = batch.texts.iter().chain(&batch.negatives).flatten().copied().collect();
    let d_t = config.d_t;
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut names = Vec::new();
    for (name, t) in params.tensors() {
        names.push(name.to_string());
        if name == "text.embedding" {
            candidates.push(used_rows.iter().flat_map(|&r| (0..d_t).map(move |c| r as usize * d_t + c)).collect());
        } else {
            candidates.push((0..t.len()).collect());
        }
    }
    // One draw per tensor first, then the rest spread in proportion to size.
    let total: usize = candidates.iter().map(Vec::len).sum();
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (ti, c) in candidates.iter().enumerate() {
        let extra = (samples.saturating_sub(candidates.len()) * c.len()).div_ceil(total);
        let k = (1 + extra).min(c.len());
        picks.extend(sample(&mut rng, c.len(), k).into_iter().map(|j| (ti, c[j])));
    }

    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|(_, g)| g.iter().copied().collect()).collect();
    let mut report = GradCheckReport {
        checked: 0,
        tensors: names.clone(),
        max_relative_error: 0.0,
        worst: None,
    };
    for (ti, flat) in picks {
        let loss_at = |delta: f64| -> Result<f64, TrainError> {
            let mut p = params.clone();
            let mut tensors = p.tensors_mut();
            let slot = tensors[ti].1.iter_mut().nth(flat).expect("index in range");
            *slot += delta;
            drop(tensors);
            batch_loss(&p, &batch)
        };
        let numeric = (loss_at(eps)? - loss_at(-eps)?) / (2.0 * eps);
        let a = analytic[ti][flat];
        let err = relative_error(a, numeric);
        report.checked += 1;
        if err >= report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((names[ti].clone(), flat, a, numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_for_every_depth() {
        for (text_depth, image_depth) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let config = ModelConfig {
                vocab_size: 15,
                d_t: 6,
                d: 5,
                d_img: 7,
                text_depth,
                text_hidden: 4,
                image_depth,
                image_hidden: 3,
            };
            let report = gradient_check(&config, 9, 120, 1e-4).unwrap();
            assert!(report.checked >= 100, "{}", report.checked);
            assert!(report.max_relative_error < 1e-4, "{report:?}");
        }
    }
}
