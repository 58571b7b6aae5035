//! Desk-scale reproduction of the compositionality/recognition tradeoff:
//! pre-train on single-object captions, fine-tune on relational captions
//! with hard negatives, then sweep the weight-space interpolation between
//! the two checkpoints.

pub mod corpus;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datapipe::{
    attach_negatives_batch, open_shards, sample_stream, spawn_sampler, write_jsonl, CaptionRecord, NegativeAttacher,
    PipeError, ShardOptions,
};
use crate::evalharness::{
    evaluate_all, load_tasks, ChoiceItem, ClassItem, ClassMetric, EvalError, Task, TaskDescriptor,
    TaskKind, TowerModel,
};
use crate::negatives::{FrequencyTable, GenerateConfig, NegativesError, Strategy};
use crate::patcher::{default_alphas, sweep, write_sweep_csv, Checkpoint, PatchError, SweepResult};
use crate::trainer::{
    save_checkpoint, train, write_metrics_csv, ModelConfig, TowerParams, TrainConfig, TrainError, TrainExample, Vocab,
};
use crate::wordnet::WordNetDB;
use corpus::{D_IMG, NOUNS, RECOGNITION_TEMPLATE};

pub const RECOGNITION_METRIC: &str = "recognition.top1";
pub const ORDER_METRIC: &str = "order.micro";

/// Acceptance thresholds of the tradeoff experiment.
pub mod thresholds {
    pub const STAGE_A_RECOGNITION_MIN: f64 = 0.90;
    pub const STAGE_A_ORDER_MAX: f64 = 0.60;
    pub const FINETUNED_ORDER_MIN: f64 = 0.85;
    pub const ALPHA_WINDOW: (f64, f64) = (0.4, 0.7);
    pub const RECOGNITION_SLACK: f64 = 0.05;
    pub const ORDER_SLACK: f64 = 0.10;
    pub const ABLATION_GAP: f64 = 0.15;
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipe(#[from] PipeError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Negatives(#[from] NegativesError),
    #[error("invalid demo configuration: {0}")]
    Config(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DemoError + '_ {
    move |source| DemoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub seed: u64,
    /// Standard deviation of the Gaussian noise on image features.
    pub noise: f64,
    /// Share of relational triples kept out of fine-tuning for the order probe.
    pub held_out_fraction: f64,
    pub stage_a_records: usize,
    pub finetune_records: usize,
    pub recognition_per_class: usize,
    pub strategies: Vec<Strategy>,
    /// One weight per strategy; empty means uniform.
    pub strategy_weights: Vec<f64>,
    pub negatives_per_caption: usize,
    pub alpha_step: f64,
    /// Also fine-tune without negatives.
    pub ablation: bool,
    /// Synchronous data loading and single-threaded negative generation.
    pub strict_determinism: bool,
    pub model: ModelConfig,
    pub stage_a: StageConfig,
    pub finetune: StageConfig,
}

/// Optimizer settings of one training stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            peak_lr: 3e-3,
            warmup_steps: 50,
            total_steps: 500,
            weight_decay: 0.1,
            batch_size: 128,
        }
    }
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 1,
            noise: 0.1,
            held_out_fraction: 0.2,
            stage_a_records: 4000,
            finetune_records: 8000,
            recognition_per_class: 25,
            strategies: vec![Strategy::Replace, Strategy::Swap, Strategy::Shuffle],
            strategy_weights: vec![1.0, 8.0, 1.0],
            negatives_per_caption: 1,
            alpha_step: 0.05,
            ablation: false,
            strict_determinism: false,
            model: ModelConfig {
                vocab_size: 0,
                d_t: 32,
                d: 64,
                d_img: D_IMG,
                text_depth: 1,
                text_hidden: 64,
                image_depth: 0,
                image_hidden: 0,
            },
            stage_a: StageConfig {
                total_steps: 300,
                ..StageConfig::default()
            },
            finetune: StageConfig {
                peak_lr: 2e-3,
                warmup_steps: 20,
                total_steps: 200,
                batch_size: 8,
                ..StageConfig::default()
            },
        }
    }
}

impl DemoConfig {
    fn train_config(&self, stage: &StageConfig, seed: u64, negatives: bool, vocab_size: usize) -> TrainConfig {
        TrainConfig {
            peak_lr: stage.peak_lr,
            warmup_steps: stage.warmup_steps,
            total_steps: stage.total_steps,
            weight_decay: stage.weight_decay,
            batch_size: stage.batch_size,
            seed,
            negatives_enabled: negatives,
            log_every: 10,
            model: ModelConfig {
                vocab_size,
                d_img: D_IMG,
                ..self.model
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeScores {
    pub recognition: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub seed: u64,
    pub stage_a: ProbeScores,
    pub finetuned: ProbeScores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<ProbeScores>,
    /// α values in the window that satisfy both closeness predicates.
    pub tradeoff_alphas: Vec<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Files written by [`demo_tradeoff`], relative to the work directory.
pub mod files {
    pub const STAGE_A_DATA: &str = "data/stage_a.jsonl";
    pub const FINETUNE_DATA: &str = "data/finetune.jsonl";
    pub const FREQ: &str = "data/freq.tsv";
    pub const VOCAB: &str = "vocab.txt";
    pub const TASKS: &str = "probes/tasks.toml";
    pub const PT: &str = "pt.clvt";
    pub const FT: &str = "ft.clvt";
    pub const FT_ABLATION: &str = "ft_no_negatives.clvt";
    pub const CURVE: &str = "curve.csv";
    pub const SUMMARY: &str = "summary.json";
    pub const METRICS_DIR: &str = "metrics";
}

fn write_records(path: &Path, records: &[CaptionRecord]) -> Result<(), DemoError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let file = fs::File::create(path).map_err(io(path))?;
    let mut out = std::io::BufWriter::new(file);
    write_jsonl(&mut out, records).map_err(io(path))?;
    std::io::Write::flush(&mut out).map_err(io(path))
}

fn write_items<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DemoError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("serializable item"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io(path))
}

/// Writes the recognition and order probes and returns their suite file.
fn write_probes(dir: &Path, recognition: &[ClassItem], order: &[ChoiceItem]) -> Result<PathBuf, DemoError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_items(&dir.join("recognition.jsonl"), recognition)?;
    write_items(&dir.join("order.jsonl"), order)?;
    fs::write(dir.join("templates.txt"), format!("{RECOGNITION_TEMPLATE}\n")).map_err(io(dir))?;
    let suite = [
        TaskDescriptor {
            name: "recognition".into(),
            kind: TaskKind::Classification,
            items: "recognition.jsonl".into(),
            classes: NOUNS.iter().map(|s| s.to_string()).collect(),
            templates: Some("templates.txt".into()),
            metric: Some(ClassMetric::Top1),
            k: None,
        },
        TaskDescriptor {
            name: "order".into(),
            kind: TaskKind::CaptionChoice,
            items: "order.jsonl".into(),
            classes: vec![],
            templates: None,
            metric: None,
            k: None,
        },
    ];
    #[derive(Serialize)]
    struct Suite<'a> {
        task: &'a [TaskDescriptor],
    }
    let path = dir.join("tasks.toml");
    let text = toml::to_string(&Suite { task: &suite }).expect("serializable suite");
    fs::write(&path, text).map_err(io(&path))?;
    Ok(path)
}

/// Every metric of every task as `task.metric`.
pub fn probe_metrics(params: &TowerParams<f32>, vocab: &Vocab, tasks: &[Task]) -> Result<Vec<(String, f64)>, EvalError> {
    let model = TowerModel::new(params, vocab.clone())?;
    let mut out = Vec::new();
    for report in evaluate_all(&model, tasks)? {
        for (k, v) in report.metrics {
            out.push((format!("{}.{k}", report.task), v));
        }
    }
    Ok(out)
}

fn scores(metrics: &[(String, f64)]) -> ProbeScores {
    let get = |name: &str| metrics.iter().find(|(k, _)| k == name).map_or(f64::NAN, |(_, v)| *v);
    ProbeScores {
        recognition: get(RECOGNITION_METRIC),
        order: get(ORDER_METRIC),
    }
}

struct Stage<'a> {
    name: &'a str,
    shard: PathBuf,
    config: TrainConfig,
    init: Option<TowerParams<f32>>,
    out: PathBuf,
}

fn run_stage(workdir: &Path, stage: Stage<'_>, vocab: &Vocab, strict: bool) -> Result<TowerParams<f32>, DemoError> {
    let set = open_shards(&[&stage.shard], ShardOptions {
        feature_dim: Some(D_IMG),
        ..ShardOptions::default()
    })?;
    let n = stage.config.total_steps * stage.config.batch_size;
    let seed = stage.config.seed;
    let to_example = |r: Result<CaptionRecord, PipeError>| -> Result<TrainExample, TrainError> {
        let r = r.map_err(|e| TrainError::Data(e.to_string()))?;
        TrainExample::from_record(&r, vocab)
    };
    log::info!("{}: {} steps of {} examples", stage.name, stage.config.total_steps, stage.config.batch_size);
    let (params, log) = if strict {
        let stream = sample_stream(&set, seed, n)?.map(to_example);
        train(stage.config, stream, stage.init, |_, _| Ok(()))?
    } else {
        let rx = spawn_sampler(set, seed, n, 4 * stage.config.batch_size)?;
        train(stage.config, rx.into_iter().map(to_example), stage.init, |_, _| Ok(()))?
    };
    let metrics_dir = workdir.join(files::METRICS_DIR);
    fs::create_dir_all(&metrics_dir).map_err(io(&metrics_dir))?;
    write_metrics_csv(&metrics_dir.join(format!("{}.csv", stage.name)), &log)?;
    save_checkpoint(&params, &stage.out)?;
    Ok(params)
}

/// Builds the corpus, trains the pre-trained and fine-tuned checkpoints,
/// sweeps α and writes `curve.csv` and `summary.json` under `workdir`.
pub fn demo_tradeoff(workdir: &Path, config: &DemoConfig, db: &WordNetDB) -> Result<DemoSummary, DemoError> {
    use thresholds::*;
    if config.recognition_per_class == 0 || config.stage_a_records == 0 || config.finetune_records == 0 {
        return Err(DemoError::Config("record and probe counts must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.held_out_fraction) {
        return Err(DemoError::Config("held_out_fraction must be in [0, 1)".into()));
    }
    fs::create_dir_all(workdir).map_err(io(workdir))?;
    let seed = config.seed;
    let sub = |k: u64| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k);

    // Corpus.
    let (train_triples, held_triples) = corpus::split_triples(sub(1), config.held_out_fraction);
    let probe_triples = if held_triples.is_empty() { &train_triples } else { &held_triples };
    let stage_a = corpus::stage_a_records(config.stage_a_records, config.noise, sub(2));
    let mut finetune = corpus::triple_records(&train_triples, config.finetune_records, config.noise, sub(3));
    let freq = FrequencyTable::from_captions(finetune.iter().map(|r| r.caption.as_str()));
    let freq_path = workdir.join(files::FREQ);
    fs::create_dir_all(freq_path.parent().expect("nested path")).map_err(io(workdir))?;
    let mut freq_tsv = Vec::new();
    freq.write_tsv(&mut freq_tsv).map_err(io(&freq_path))?;
    fs::write(&freq_path, freq_tsv).map_err(io(&freq_path))?;
    let attacher = NegativeAttacher {
        db,
        freq: &freq,
        config: GenerateConfig {
            strategies: config.strategies.clone(),
            weights: if config.strategy_weights.is_empty() {
                vec![1.0; config.strategies.len()]
            } else {
                config.strategy_weights.clone()
            },
            per_caption: config.negatives_per_caption,
        },
        seed: sub(4),
        parallel: !config.strict_determinism,
    };
    attacher.config.validate()?;
    finetune = attach_negatives_batch(finetune, &attacher);
    write_records(&workdir.join(files::STAGE_A_DATA), &stage_a)?;
    write_records(&workdir.join(files::FINETUNE_DATA), &finetune)?;

    let vocab = Vocab::from_captions(
        stage_a
            .iter()
            .chain(&finetune)
            .flat_map(|r| std::iter::once(r.caption.as_str()).chain(r.negative_texts()))
            .chain(std::iter::once(RECOGNITION_TEMPLATE)),
    );
    vocab.save(workdir.join(files::VOCAB))?;

    let recognition = corpus::recognition_items(config.recognition_per_class, config.noise, sub(5));
    let order = corpus::order_items(probe_triples, config.noise, sub(6));
    let suite = write_probes(&workdir.join("probes"), &recognition, &order)?;
    let tasks = load_tasks(&suite)?;

    // Stage A, then fine-tuning from it.
    let strict = config.strict_determinism;
    let pt = run_stage(
        workdir,
        Stage {
            name: "stage_a",
            shard: workdir.join(files::STAGE_A_DATA),
            config: config.train_config(&config.stage_a, sub(7), false, vocab.len()),
            init: None,
            out: workdir.join(files::PT),
        },
        &vocab,
        strict,
    )?;
    let ft = run_stage(
        workdir,
        Stage {
            name: "finetune",
            shard: workdir.join(files::FINETUNE_DATA),
            config: config.train_config(&config.finetune, sub(8), true, vocab.len()),
            init: Some(pt.clone()),
            out: workdir.join(files::FT),
        },
        &vocab,
        strict,
    )?;
    let ablation = if config.ablation {
        let params = run_stage(
            workdir,
            Stage {
                name: "finetune_no_negatives",
                shard: workdir.join(files::FINETUNE_DATA),
                config: config.train_config(&config.finetune, sub(8), false, vocab.len()),
                init: Some(pt.clone()),
                out: workdir.join(files::FT_ABLATION),
            },
            &vocab,
            strict,
        )?;
        Some(scores(&probe_metrics(&params, &vocab, &tasks)?))
    } else {
        None
    };

    // Sweep.
    let alphas = default_alphas(config.alpha_step)?;
    let (pt_ckpt, ft_ckpt): (Checkpoint, Checkpoint) = (pt.to_checkpoint(), ft.to_checkpoint());
    let curve: SweepResult = sweep(&pt_ckpt, &ft_ckpt, &alphas, false, |_, ckpt| {
        let params = TowerParams::from_checkpoint(ckpt, None).map_err(|e| PatchError::Eval(e.to_string()))?;
        probe_metrics(&params, &vocab, &tasks).map_err(|e| PatchError::Eval(e.to_string()))
    })?;
    write_sweep_csv(&curve, &workdir.join(files::CURVE))?;

    let at = |alpha: f64| ProbeScores {
        recognition: curve.value(alpha, RECOGNITION_METRIC).unwrap_or(f64::NAN),
        order: curve.value(alpha, ORDER_METRIC).unwrap_or(f64::NAN),
    };
    let stage_a_scores = at(0.0);
    let finetuned = at(1.0);
    let tradeoff_alphas: Vec<f64> = alphas
        .iter()
        .copied()
        .filter(|a| (ALPHA_WINDOW.0 - 1e-9..=ALPHA_WINDOW.1 + 1e-9).contains(a))
        .filter(|&a| {
            let s = at(a);
            s.recognition >= stage_a_scores.recognition - RECOGNITION_SLACK && s.order >= finetuned.order - ORDER_SLACK
        })
        .collect();

    let mut checks = vec![
        Check {
            name: "stage_a_recognition".into(),
            passed: stage_a_scores.recognition >= STAGE_A_RECOGNITION_MIN,
            detail: format!("{:.4} >= {STAGE_A_RECOGNITION_MIN}", stage_a_scores.recognition),
        },
        Check {
            name: "stage_a_order".into(),
            passed: stage_a_scores.order <= STAGE_A_ORDER_MAX,
            detail: format!("{:.4} <= {STAGE_A_ORDER_MAX}", stage_a_scores.order),
        },
        Check {
            name: "finetuned_order".into(),
            passed: finetuned.order >= FINETUNED_ORDER_MIN,
            detail: format!("{:.4} >= {FINETUNED_ORDER_MIN}", finetuned.order),
        },
        Check {
            name: "tradeoff_alpha".into(),
            passed: !tradeoff_alphas.is_empty(),
            detail: format!("alphas in [{}, {}] meeting both predicates: {tradeoff_alphas:?}", ALPHA_WINDOW.0, ALPHA_WINDOW.1),
        },
    ];
    if let Some(ab) = ablation {
        checks.push(Check {
            name: "ablation_gap".into(),
            passed: finetuned.order - ab.order >= ABLATION_GAP - 1e-9,
            detail: format!("{:.4} - {:.4} >= {ABLATION_GAP}", finetuned.order, ab.order),
        });
    }
    let summary = DemoSummary {
        seed,
        stage_a: stage_a_scores,
        finetuned,
        ablation,
        tradeoff_alphas,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let path = workdir.join(files::SUMMARY);
    let text = serde_json::to_string_pretty(&summary).expect("serializable summary");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(summary)
}
