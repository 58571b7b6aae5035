//! Interpolate a pre-trained and a fine-tuned checkpoint in weight space and
//! trace recognition and word-order accuracy along the way.
//!
//! ```bash
//! cargo run --release -p clove --example patch_sweep -- [curve.csv]
//! ```
//!
//! Both checkpoints are trained here at a small scale; see the
//! `demo_tradeoff` example for the full experiment.

use clove::datapipe::NegativeAttacher;
use clove::demo::corpus::{object_caption, order_items, recognition_items, split_triples, stage_a_records, triple_records, NOUNS, D_IMG};
use clove::evalharness::{evaluate_all, CaptionChoiceTask, ClassMetric, ClassificationTask, Task, TowerModel};
use clove::negatives::{FrequencyTable, GenerateConfig, Strategy};
use clove::patcher::{default_alphas, patch, patch_with_info, sweep, write_sweep_csv, Checkpoint, PatchError};
use clove::trainer::{train, ModelConfig, TowerParams, TrainConfig, TrainExample, Vocab};
use clove::wordnet::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "curve.csv".into());

    let (train_triples, held_out) = split_triples(2, 0.2);
    let objects = stage_a_records(2000, 0.1, 3);
    let scenes = triple_records(&train_triples, 4000, 0.1, 4);
    let freq = FrequencyTable::from_captions(scenes.iter().map(|r| r.caption.as_str()));
    let attacher = NegativeAttacher {
        db: bundled(),
        freq: &freq,
        config: GenerateConfig::uniform(&[Strategy::Replace, Strategy::Swap, Strategy::Shuffle]),
        seed: 5,
        parallel: true,
    };
    let scenes: Vec<_> = scenes.into_iter().map(|r| attacher.attach(r)).collect();
    let vocab = Vocab::from_captions(
        objects
            .iter()
            .chain(&scenes)
            .flat_map(|r| std::iter::once(r.caption.as_str()).chain(r.negative_texts())),
    );
    let config = |steps: usize, negatives: bool| TrainConfig {
        warmup_steps: steps / 10,
        total_steps: steps,
        batch_size: 32,
        negatives_enabled: negatives,
        model: ModelConfig {
            vocab_size: vocab.len(),
            d_img: D_IMG,
            text_depth: 1,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let examples = |records: &[clove::datapipe::CaptionRecord]| -> Result<Vec<TrainExample>, clove::trainer::TrainError> {
        records.iter().map(|r| TrainExample::from_record(r, &vocab)).collect()
    };
    let (obj, scn) = (examples(&objects)?, examples(&scenes)?);
    let (pt, _) = train(config(300, false), obj.iter().cycle().take(300 * 32).cloned().map(Ok), None, |_, _| Ok(()))?;
    let (ft, _) = train(config(300, true), scn.iter().cycle().take(300 * 32).cloned().map(Ok), Some(pt.clone()), |_, _| Ok(()))?;
    let (pt, ft) = (pt.to_checkpoint(), ft.to_checkpoint());

    // The endpoints are the inputs themselves, bit for bit.
    assert!(patch(&pt, &ft, 0.0)?.bits_eq(&pt) && patch(&pt, &ft, 1.0)?.bits_eq(&ft));
    let (_, info) = patch_with_info(&pt, &ft, 0.5)?;
    println!("patching {} tensors: pt {} ft {}", pt.len(), info.pt, info.ft);

    let tasks = vec![
        Task::Classification {
            name: "recognition".into(),
            task: ClassificationTask {
                classes: NOUNS.iter().map(|s| s.to_string()).collect(),
                templates: vec![object_caption(0).replace(NOUNS[0], "{}")],
                items: recognition_items(10, 0.1, 6),
                metric: ClassMetric::Top1,
            },
        },
        Task::CaptionChoice {
            name: "order".into(),
            task: CaptionChoiceTask {
                items: order_items(&held_out, 0.1, 7),
            },
        },
    ];
    let evaluate = |_: f64, ckpt: &Checkpoint| -> Result<Vec<(String, f64)>, PatchError> {
        let fail = |e: &dyn std::fmt::Display| PatchError::Eval(e.to_string());
        let params = TowerParams::from_checkpoint(ckpt, None).map_err(|e| fail(&e))?;
        let model = TowerModel::new(&params, vocab.clone()).map_err(|e| fail(&e))?;
        let reports = evaluate_all(&model, &tasks).map_err(|e| fail(&e))?;
        Ok(reports
            .iter()
            .flat_map(|r| r.metrics.iter().map(move |(k, v)| (format!("{}.{k}", r.task), *v)))
            .collect())
    };
    let curve = sweep(&pt, &ft, &default_alphas(0.1)?, true, evaluate)?;
    println!("{:>5}  {:>11}  {:>5}", "alpha", "recognition", "order");
    for ((alpha, rec), (_, ord)) in curve.series("recognition.top1").into_iter().zip(curve.series("order.micro")) {
        println!("{alpha:>5.2}  {rec:>11.3}  {ord:>5.3}");
    }
    write_sweep_csv(&curve, out.as_ref())?;
    println!("wrote {out}");
    Ok(())
}
