//! Run the three evaluation protocols against a hand-written encoder, first
//! from in-memory tasks and then from TOML descriptors on disk.
//!
//! ```bash
//! cargo run -p clove --example evaluate_tasks
//! ```
//!
//! The encoder embeds captions as bags of known words and reads image
//! features as word indicators, so it recognizes objects but ignores word
//! order: caption choice between a caption and its reordering ties and
//! counts as wrong.

use ndarray::Array1;

use clove::evalharness::{
    evaluate, load_tasks, normalize, CaptionChoiceTask, ChoiceItem, ClassItem, ClassMetric, ClassificationTask,
    EvalError, Encoder, Label, RetrievalItem, RetrievalTask, Task,
};

const WORDS: [&str; 6] = ["dog", "cat", "horse", "red", "chases", "grass"];

struct BagOfWords;

impl Encoder for BagOfWords {
    fn embed_text(&self, caption: &str) -> Result<Array1<f64>, EvalError> {
        let mut v = Array1::from_elem(WORDS.len() + 1, 0.05);
        for w in caption.split_whitespace() {
            if let Some(i) = WORDS.iter().position(|x| x.eq_ignore_ascii_case(w)) {
                v[i] += 1.0;
            }
        }
        normalize(v.view(), caption)
    }

    fn embed_image(&self, features: &[f32]) -> Result<Array1<f64>, EvalError> {
        let mut v: Array1<f64> = features.iter().map(|&x| x as f64).collect();
        v[WORDS.len()] += 0.05;
        normalize(v.view(), "image")
    }
}

fn image(words: &[&str]) -> Vec<f32> {
    let mut x = vec![0.0; WORDS.len() + 1];
    for w in words {
        x[WORDS.iter().position(|v| v == w).expect("known word")] = 1.0;
    }
    x
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tasks = [
        Task::Classification {
            name: "animals".into(),
            task: ClassificationTask {
                classes: vec!["dog".into(), "cat".into(), "horse".into()],
                templates: vec!["a photo of a {}".into(), "a {} on the grass".into()],
                items: vec![
                    ClassItem { image_features: image(&["dog"]), label: Label::Index(0) },
                    ClassItem { image_features: image(&["cat", "grass"]), label: Label::Name("cat".into()) },
                    ClassItem { image_features: image(&["horse"]), label: Label::Index(2) },
                ],
                metric: ClassMetric::MeanPerClass,
            },
        },
        Task::Retrieval {
            name: "scenes".into(),
            task: RetrievalTask {
                items: vec![
                    RetrievalItem { image_features: image(&["dog", "grass"]), caption: "a dog on the grass".into() },
                    RetrievalItem { image_features: image(&["red", "horse"]), caption: "a red horse".into() },
                    RetrievalItem { image_features: image(&["cat"]), caption: "a cat".into() },
                ],
                k: 2,
            },
        },
        Task::CaptionChoice {
            name: "compositional".into(),
            task: CaptionChoiceTask {
                items: vec![
                    ChoiceItem {
                        image_features: image(&["dog", "cat", "chases"]),
                        positive: "a dog chases a cat".into(),
                        negatives: vec!["a cat chases a dog".into()],
                        group: Some("order".into()),
                    },
                    ChoiceItem {
                        image_features: image(&["red", "horse"]),
                        positive: "a red horse".into(),
                        negatives: vec!["a red dog".into()],
                        group: Some("replace".into()),
                    },
                ],
            },
        },
    ];
    for task in &tasks {
        let report = evaluate(&BagOfWords, task)?;
        println!("{} ({:?}, {} items)", report.task, report.kind, report.items);
        for (metric, value) in &report.metrics {
            println!("  {metric:<28} {value:.3}");
        }
    }

    // The same caption-choice task as files: a JSONL item file and a suite.
    let dir = tempfile::tempdir()?;
    let Task::CaptionChoice { task, .. } = &tasks[2] else { unreachable!() };
    let lines: Vec<String> = task.items.iter().map(serde_json::to_string).collect::<Result<_, _>>()?;
    std::fs::write(dir.path().join("choice.jsonl"), lines.join("\n") + "\n")?;
    std::fs::write(
        dir.path().join("suite.toml"),
        "[[task]]\nname = \"compositional\"\nkind = \"caption_choice\"\nitems = \"choice.jsonl\"\n",
    )?;
    for task in load_tasks(&dir.path().join("suite.toml"))? {
        let report = evaluate(&BagOfWords, &task)?;
        println!("from disk: {} {}", report.task, serde_json::to_string(&report.metrics)?);
    }
    Ok(())
}
