//! Train the two-tower model on synthetic (subject, relation, object)
//! scenes, with and without hard negatives, and compare how often each
//! prefers the true caption over its argument swap.
//!
//! ```bash
//! cargo run --release -p clove --example train_two_tower -- [STEPS] [OUT.clvt]
//! ```

use clove::datapipe::NegativeAttacher;
use clove::demo::corpus::{order_items, split_triples, triple_records, D_IMG};
use clove::evalharness::{caption_choice, CaptionChoiceTask, TowerModel};
use clove::negatives::{FrequencyTable, GenerateConfig, Strategy};
use clove::trainer::{save_checkpoint, train, ModelConfig, TrainConfig, TrainExample, Vocab};
use clove::wordnet::bundled;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(Ok(300), |s| s.parse())?;
    let out = args.next();

    let (train_triples, held_out) = split_triples(5, 0.2);
    let records = triple_records(&train_triples, 4000, 0.1, 6);
    let freq = FrequencyTable::from_captions(records.iter().map(|r| r.caption.as_str()));
    let attacher = NegativeAttacher {
        db: bundled(),
        freq: &freq,
        config: GenerateConfig::uniform(&[Strategy::Swap, Strategy::Replace]),
        seed: 7,
        parallel: true,
    };
    let records: Vec<_> = records.into_iter().map(|r| attacher.attach(r)).collect();
    let vocab = Vocab::from_captions(records.iter().flat_map(|r| std::iter::once(r.caption.as_str()).chain(r.negative_texts())));
    let examples: Vec<TrainExample> = records.iter().map(|r| TrainExample::from_record(r, &vocab)).collect::<Result<_, _>>()?;
    let probe = CaptionChoiceTask {
        items: order_items(&held_out, 0.1, 8),
    };

    for negatives in [false, true] {
        let config = TrainConfig {
            peak_lr: 3e-3,
            warmup_steps: steps / 10,
            total_steps: steps,
            batch_size: 32,
            seed: 1,
            negatives_enabled: negatives,
            log_every: (steps / 5).max(1),
            model: ModelConfig {
                vocab_size: vocab.len(),
                d_img: D_IMG,
                text_depth: 1,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let stream = examples.iter().cycle().take(steps * config.batch_size).cloned().map(Ok);
        let (params, log) = train(config, stream, None, |_, _| Ok(()))?;
        println!("negatives {negatives}:");
        for s in &log {
            println!("  step {:>4}  loss {:.4}  lr {:.2e}  temperature {:.2}", s.step, s.loss, s.lr, s.temperature);
        }
        let model = TowerModel::new(&params, vocab.clone())?;
        let scores = caption_choice(&model, &probe)?;
        println!("  held-out order accuracy {:.3}", scores.micro);
        if let (true, Some(path)) = (negatives, &out) {
            let digest = save_checkpoint(&params, path.as_ref())?;
            vocab.save(std::path::Path::new(path).with_extension("vocab.txt"))?;
            println!("  saved {path} ({digest})");
        }
    }
    Ok(())
}
