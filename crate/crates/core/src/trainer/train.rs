use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::split_rows;
use super::loss::{info_nce, InfoNce};
use super::optim::{lr_at, AdamW};
use super::params::{lit, ModelConfig, Scalar, TowerParams};
use super::vocab::Vocab;
use super::TrainError;
use crate::datapipe::CaptionRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub negatives_enabled: bool,
    /// Record metrics every this many steps (and at the last step).
    pub log_every: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            peak_lr: 3e-3,
            warmup_steps: 2000,
            total_steps: 10_000,
            weight_decay: 0.1,
            batch_size: 256,
            seed: 0,
            negatives_enabled: true,
            log_every: 50,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.warmup_steps > self.total_steps {
            return Err(TrainError::Config(format!(
                "warmup_steps {} exceeds total_steps {}",
                self.warmup_steps, self.total_steps
            )));
        }
        if self.batch_size < 2 {
            return Err(TrainError::Config("batch_size must be at least 2".to_string()));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr >= 0.0) || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config("peak_lr and weight_decay must be finite and non-negative".to_string()));
        }
        if self.log_every == 0 {
            return Err(TrainError::Config("log_every must be positive".to_string()));
        }
        self.model.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        lr_at(step, self.peak_lr, self.warmup_steps, self.total_steps)
    }
}

/// One training pair with its candidate hard negatives, already tokenized.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub image: Vec<f32>,
    pub text: Vec<u32>,
    pub negatives: Vec<Vec<u32>>,
}

impl TrainExample {
    pub fn from_record(record: &CaptionRecord, vocab: &Vocab) -> Result<Self, TrainError> {
        let image = record
            .image_features
            .clone()
            .ok_or_else(|| TrainError::Data(format!("record {:?} has no image_features", record.id)))?;
        Ok(TrainExample {
            image,
            text: vocab.encode(&record.caption),
            negatives: record.negative_texts().map(|t| vocab.encode(t)).collect(),
        })
    }
}

/// N images with their positive texts, plus up to N hard negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<F> {
    pub images: Array2<F>,
    pub texts: Vec<Vec<u32>>,
    pub negatives: Vec<Vec<u32>>,
}

impl<F: Scalar> Batch<F> {
    /// Stacks examples. With `rng`, each example contributes one of its
    /// negatives chosen uniformly; without, none.
    pub fn from_examples(examples: &[TrainExample], rng: Option<&mut ChaCha8Rng>) -> Result<Self, TrainError> {
        let n = examples.len();
        if n < 2 {
            return Err(TrainError::DegenerateBatch(n));
        }
        let d = examples[0].image.len();
        let mut images = Array2::zeros((n, d));
        for (ex, mut row) in examples.iter().zip(images.rows_mut()) {
            if ex.image.len() != d {
                return Err(TrainError::DimensionMismatch {
                    expected: d,
                    got: ex.image.len(),
                });
            }
            row.iter_mut().zip(&ex.image).for_each(|(r, &x)| *r = lit(x as f64));
        }
        let mut negatives = Vec::new();
        if let Some(rng) = rng {
            for ex in examples {
                if !ex.negatives.is_empty() {
                    let k = rng.random_range(0..ex.negatives.len());
                    negatives.push(ex.negatives[k].clone());
                }
            }
        }
        Ok(Batch {
            images,
            texts: examples.iter().map(|e| e.text.clone()).collect(),
            negatives,
        })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let n = self.images.nrows();
        if n < 2 {
            return Err(TrainError::DegenerateBatch(n));
        }
        if self.texts.len() != n {
            return Err(TrainError::ShapeMismatch(format!("{n} images but {} texts", self.texts.len())));
        }
        if self.negatives.len() > n {
            return Err(TrainError::ShapeMismatch(format!(
                "{} negatives for {n} examples",
                self.negatives.len()
            )));
        }
        Ok(())
    }
}

/// Loss and parameter gradients for one batch.
pub fn batch_gradients<F: Scalar>(params: &TowerParams<F>, batch: &Batch<F>) -> Result<(InfoNce<F>, TowerParams<F>), TrainError> {
    batch.validate()?;
    let n = batch.texts.len();
    let images = params.image_forward(batch.images.view())?;
    let sequences: Vec<&[u32]> = batch.texts.iter().chain(&batch.negatives).map(Vec::as_slice).collect();
    let texts = params.text_forward(&sequences)?;
    let (pos, neg) = split_rows(&texts.embeddings, n);
    let out = info_nce(images.embeddings.view(), pos, neg, params.log_temperature())?;

    let mut grads = params.zeros_like();
    params.image_backward(&images, out.d_images.view(), &mut grads);
    let d_text = ndarray::concatenate(ndarray::Axis(0), &[out.d_texts.view(), out.d_negatives.view()]).expect("same width");
    params.text_backward(&texts, d_text.view(), &mut grads);
    grads.log_temperature[0] = out.d_log_temperature;
    Ok((out, grads))
}

/// Loss only.
pub fn batch_loss<F: Scalar>(params: &TowerParams<F>, batch: &Batch<F>) -> Result<F, TrainError> {
    batch.validate()?;
    let n = batch.texts.len();
    let images = params.image_forward(batch.images.view())?;
    let sequences: Vec<&[u32]> = batch.texts.iter().chain(&batch.negatives).map(Vec::as_slice).collect();
    let texts = params.text_forward(&sequences)?;
    let (pos, neg): (ArrayView2<F>, ArrayView2<F>) = split_rows(&texts.embeddings, n);
    Ok(info_nce(images.embeddings.view(), pos, neg, params.log_temperature())?.loss)
}

/// Metrics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    /// 1-based count of completed updates.
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    /// `exp(log_temperature)` after the update.
    pub temperature: f64,
    #[serde(skip)]
    pub texts: usize,
}

/// Single-threaded optimizer loop state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub params: TowerParams<f32>,
    optimizer: AdamW<f32>,
    rng: ChaCha8Rng,
    step: usize,
}

impl Trainer {
    /// Starts from `init` or from a fresh initialization seeded by the
    /// config seed.
    pub fn new(config: TrainConfig, init: Option<TowerParams<f32>>) -> Result<Self, TrainError> {
        config.validate()?;
        let params = match init {
            Some(p) => {
                if !p.config().same_shape(&config.model) {
                    return Err(TrainError::ShapeMismatch(format!(
                        "initial parameters have {:?}, configuration expects {:?}",
                        p.config(),
                        config.model
                    )));
                }
                p
            }
            None => TowerParams::init(&config.model, config.seed)?,
        };
        let optimizer = AdamW::new(&params);
        let rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6e65_6761_7469_7665);
        Ok(Trainer {
            config,
            params,
            optimizer,
            rng,
            step: 0,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.config.total_steps
    }

    /// One update on `examples`.
    pub fn step(&mut self, examples: &[TrainExample]) -> Result<StepStats, TrainError> {
        let rng = if self.config.negatives_enabled { Some(&mut self.rng) } else { None };
        let batch = Batch::<f32>::from_examples(examples, rng)?;
        let (out, grads) = batch_gradients(&self.params, &batch)?;
        let lr = self.config.lr_at(self.step + 1);
        self.optimizer.step(&mut self.params, &grads, lr, self.config.weight_decay)?;
        self.step += 1;
        Ok(StepStats {
            step: self.step,
            loss: out.loss as f64,
            lr,
            temperature: (self.params.log_temperature() as f64).exp(),
            texts: batch.texts.len() + batch.negatives.len(),
        })
    }
}

/// Runs `config.total_steps` updates on batches drawn from `stream`. Calls
/// `on_step` after every update; returns the final parameters and the
/// metrics logged every `log_every` steps.
pub fn train<I, C>(
    config: TrainConfig,
    stream: I,
    init: Option<TowerParams<f32>>,
    mut on_step: C,
) -> Result<(TowerParams<f32>, Vec<StepStats>), TrainError>
where
    I: IntoIterator<Item = Result<TrainExample, TrainError>>,
    C: FnMut(&Trainer, &StepStats) -> Result<(), TrainError>,
{
    let mut trainer = Trainer::new(config, init)?;
    let mut stream = stream.into_iter();
    let mut log = Vec::new();
    let mut examples = Vec::with_capacity(trainer.config.batch_size);
    while !trainer.is_done() {
        examples.clear();
        for _ in 0..trainer.config.batch_size {
            match stream.next() {
                Some(ex) => examples.push(ex?),
                None => {
                    return Err(TrainError::Data(format!(
                        "example stream ended after {} steps",
                        trainer.steps_done()
                    )))
                }
            }
        }
        let stats = trainer.step(&examples)?;
        if stats.step % trainer.config.log_every == 0 || trainer.is_done() {
            log::debug!("step {} loss {:.5} lr {:.3e} temperature {:.3}", stats.step, stats.loss, stats.lr, stats.temperature);
            log.push(stats);
        }
        on_step(&trainer, &stats)?;
    }
    Ok((trainer.params, log))
}

/// Writes `step,loss,lr,temperature`.
pub fn write_metrics_csv(path: &Path, rows: &[StepStats]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| TrainError::Data(format!("{}: {e}", path.display())))?;
    for row in rows {
        w.serialize(row).map_err(|e| TrainError::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| TrainError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_examples(count: usize, seed: u64) -> Vec<TrainExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let class = rng.random_range(0..2usize);
                let mut image = vec![0.0f32; 4];
                image[class] = 1.0;
                image[2 + rng.random_range(0..2usize)] = rng.random_range(-0.1..0.1);
                TrainExample {
                    image,
                    text: vec![2 + class as u32],
                    negatives: vec![vec![3 - class as u32]],
                }
            })
            .collect()
    }

    fn toy_config(negatives: bool) -> TrainConfig {
        TrainConfig {
            peak_lr: 0.02,
            warmup_steps: 20,
            total_steps: 200,
            batch_size: 16,
            seed: 4,
            negatives_enabled: negatives,
            log_every: 1,
            model: ModelConfig {
                vocab_size: 4,
                d_t: 4,
                d: 4,
                d_img: 4,
                text_depth: 0,
                text_hidden: 0,
                image_depth: 0,
                image_hidden: 0,
            },
            ..TrainConfig::default()
        }
    }

    fn run(config: TrainConfig) -> (TowerParams<f32>, Vec<StepStats>) {
        let data = toy_examples(64, 1);
        let stream = data.into_iter().cycle().map(Ok);
        train(config, stream, None, |_, _| Ok(())).unwrap()
    }

    #[test]
    fn separable_toy_set_descends() {
        let (_, log) = run(toy_config(false));
        assert_eq!(log.len(), 200);
        assert!(log.last().unwrap().loss < log[0].loss);
        assert!(log.iter().all(|s| s.temperature <= 100.0 + 1e-4));
    }

    #[test]
    fn negatives_at_most_double_text_count() {
        let (_, off) = run(toy_config(false));
        let (_, on) = run(toy_config(true));
        assert!(off.iter().all(|s| s.texts == 16));
        assert!(on.iter().all(|s| s.texts > 16 && s.texts <= 32));
    }

    #[test]
    fn same_seed_same_bits() {
        let (a, _) = run(toy_config(true));
        let (b, _) = run(toy_config(true));
        assert!(a.to_checkpoint().bits_eq(&b.to_checkpoint()));
        let mut other = toy_config(true);
        other.seed = 5;
        let (c, _) = run(other);
        assert!(!a.to_checkpoint().bits_eq(&c.to_checkpoint()));
    }

    #[test]
    fn config_checks() {
        let mut c = TrainConfig::default();
        c.warmup_steps = c.total_steps + 1;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let parsed = TrainConfig::from_toml("total_steps = 3000\nnegatives_enabled = false\n[model]\nd = 8\n").unwrap();
        assert_eq!(parsed.total_steps, 3000);
        assert_eq!(parsed.model.d, 8);
        assert_eq!(parsed.batch_size, 256);
        assert!(TrainConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn stream_too_short() {
        let data = toy_examples(20, 1);
        let err = train(toy_config(false), data.into_iter().map(Ok), None, |_, _| Ok(())).unwrap_err();
        assert!(matches!(err, TrainError::Data(_)));
    }

    #[test]
    fn metrics_csv_header() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("m.csv");
        let (_, log) = run(toy_config(false));
        write_metrics_csv(&path, &log[..2]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("step,loss,lr,temperature\n1,"));
    }
}
