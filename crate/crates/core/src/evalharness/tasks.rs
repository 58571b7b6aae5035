use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, choice_correct, choice_scores, paired_ranks, predict, recall_from_ranks, ChoiceScores, ClassMetric, Recall};
use super::{normalize, EvalError, Encoder};
use crate::patcher::Digest;

/// Class given by index or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassItem {
    pub image_features: Vec<f32>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTask {
    pub classes: Vec<String>,
    /// Each holds one `{}`. Empty means the bare class name is embedded.
    pub templates: Vec<String>,
    pub items: Vec<ClassItem>,
    pub metric: ClassMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalItem {
    pub image_features: Vec<f32>,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalTask {
    pub items: Vec<RetrievalItem>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceItem {
    pub image_features: Vec<f32>,
    pub positive: String,
    pub negatives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionChoiceTask {
    pub items: Vec<ChoiceItem>,
}

/// Group name for items without one.
pub const DEFAULT_GROUP: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Retrieval,
    CaptionChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Classification { name: String, task: ClassificationTask },
    Retrieval { name: String, task: RetrievalTask },
    CaptionChoice { name: String, task: CaptionChoiceTask },
}

impl Task {
    pub fn name(&self) -> &str {
        match self {
            Task::Classification { name, .. } | Task::Retrieval { name, .. } | Task::CaptionChoice { name, .. } => name,
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Classification { .. } => TaskKind::Classification,
            Task::Retrieval { .. } => TaskKind::Retrieval,
            Task::CaptionChoice { .. } => TaskKind::CaptionChoice,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Task::Classification { task, .. } => task.items.len(),
            Task::Retrieval { task, .. } => task.items.len(),
            Task::CaptionChoice { task, .. } => task.items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ClassificationTask {
    /// Class index of every item.
    pub fn labels(&self) -> Result<Vec<usize>, EvalError> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let idx = match &item.label {
                    Label::Index(k) => Some(*k).filter(|k| *k < self.classes.len()),
                    Label::Name(n) => self.classes.iter().position(|c| c == n),
                };
                idx.ok_or_else(|| EvalError::InvalidTask(format!("item {i}: label {:?} is not a class", item.label)))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.classes.is_empty() {
            return Err(EvalError::InvalidTask("no classes".to_string()));
        }
        for t in &self.templates {
            check_template(t)?;
        }
        self.labels().map(|_| ())
    }
}

impl RetrievalTask {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k == 0 {
            return Err(EvalError::InvalidTask("k must be positive".to_string()));
        }
        if self.items.is_empty() {
            return Err(EvalError::InvalidTask("retrieval task has no items".to_string()));
        }
        Ok(())
    }
}

impl CaptionChoiceTask {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (i, item) in self.items.iter().enumerate() {
            if item.negatives.is_empty() {
                return Err(EvalError::InvalidTask(format!("item {i} has no negatives")));
            }
            if item.negatives.contains(&item.positive) {
                return Err(EvalError::InvalidTask(format!("item {i}: positive caption is also a negative")));
            }
        }
        Ok(())
    }
}

fn check_template(template: &str) -> Result<(), EvalError> {
    if template.matches("{}").count() != 1 {
        return Err(EvalError::BadTemplate(template.to_string()));
    }
    Ok(())
}

fn embed_images<E: Encoder + ?Sized>(model: &E, features: Vec<&[f32]>) -> Result<Array2<f64>, EvalError> {
    let rows: Vec<Array1<f64>> = features.into_par_iter().map(|f| model.embed_image(f)).collect::<Result<_, _>>()?;
    stack(rows)
}

fn embed_texts<E: Encoder + ?Sized>(model: &E, texts: Vec<&str>) -> Result<Array2<f64>, EvalError> {
    let rows: Vec<Array1<f64>> = texts.into_par_iter().map(|t| model.embed_text(t)).collect::<Result<_, _>>()?;
    stack(rows)
}

fn stack(rows: Vec<Array1<f64>>) -> Result<Array2<f64>, EvalError> {
    let d = rows.first().map_or(0, Array1::len);
    let mut out = Array2::zeros((rows.len(), d));
    for (mut dst, src) in out.rows_mut().into_iter().zip(&rows) {
        if src.len() != d {
            return Err(EvalError::InvalidTask("encoder returned embeddings of different widths".to_string()));
        }
        dst.assign(src);
    }
    Ok(out)
}

/// Prompt-ensembled class prototype: the renormalized mean of the unit
/// embeddings of every filled template, or of the bare name without
/// templates.
pub fn class_embedding<E: Encoder + ?Sized>(model: &E, class: &str, templates: &[String]) -> Result<Array1<f64>, EvalError> {
    if templates.is_empty() {
        return model.embed_text(class);
    }
    for t in templates {
        check_template(t)?;
    }
    let prompts: Vec<String> = templates.iter().map(|t| t.replacen("{}", class, 1)).collect();
    let rows = embed_texts(model, prompts.iter().map(String::as_str).collect())?;
    let mean = rows.sum_axis(ndarray::Axis(0)) / rows.nrows() as f64;
    normalize(mean.view(), &format!("mean prompt embedding of class {class:?}"))
}

/// Accuracy under the task's metric. Ties go to the lowest class index.
pub fn zero_shot_classify<E: Encoder + ?Sized>(model: &E, task: &ClassificationTask) -> Result<f64, EvalError> {
    task.validate()?;
    let labels = task.labels()?;
    let classes: Vec<Array1<f64>> = task
        .classes
        .iter()
        .map(|c| class_embedding(model, c, &task.templates))
        .collect::<Result<_, _>>()?;
    let classes = stack(classes)?;
    let images = embed_images(model, task.items.iter().map(|i| i.image_features.as_slice()).collect())?;
    let preds = predict(classes.view(), images.view());
    Ok(accuracy(&preds, &labels, task.classes.len(), task.metric))
}

/// Recall@`task.k` in both directions.
pub fn retrieval_recall<E: Encoder + ?Sized>(model: &E, task: &RetrievalTask) -> Result<Recall, EvalError> {
    task.validate()?;
    let (images, texts) = retrieval_embeddings(model, task)?;
    Ok(recall_from_ranks(&paired_ranks(images.view(), texts.view()), task.k))
}

fn retrieval_embeddings<E: Encoder + ?Sized>(model: &E, task: &RetrievalTask) -> Result<(Array2<f64>, Array2<f64>), EvalError> {
    let images = embed_images(model, task.items.iter().map(|i| i.image_features.as_slice()).collect())?;
    let texts = embed_texts(model, task.items.iter().map(|i| i.caption.as_str()).collect())?;
    Ok((images, texts))
}

/// Micro, per-group and macro accuracy of strict positive-over-negatives
/// choices.
pub fn caption_choice<E: Encoder + ?Sized>(model: &E, task: &CaptionChoiceTask) -> Result<ChoiceScores, EvalError> {
    task.validate()?;
    let outcomes: Vec<bool> = task
        .items
        .par_iter()
        .map(|item| {
            let img = model.embed_image(&item.image_features)?;
            let pos = img.dot(&model.embed_text(&item.positive)?);
            let negs: Vec<f64> = item
                .negatives
                .iter()
                .map(|n| Ok(img.dot(&model.embed_text(n)?)))
                .collect::<Result<_, EvalError>>()?;
            Ok(choice_correct(pos, &negs))
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(choice_scores(
        task.items
            .iter()
            .zip(outcomes)
            .map(|(item, ok)| (item.group.as_deref().unwrap_or(DEFAULT_GROUP), ok)),
    ))
}

/// Every metric of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: String,
    pub kind: TaskKind,
    pub items: usize,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<Digest>,
}

pub fn evaluate<E: Encoder + ?Sized>(model: &E, task: &Task) -> Result<Report, EvalError> {
    let mut metrics = BTreeMap::new();
    match task {
        Task::Classification { task, .. } => {
            metrics.insert(task.metric.as_str().to_string(), zero_shot_classify(model, task)?);
        }
        Task::Retrieval { task, .. } => {
            task.validate()?;
            let (images, texts) = retrieval_embeddings(model, task)?;
            let ranks = paired_ranks(images.view(), texts.view());
            let mut ks = vec![1, task.k];
            ks.dedup();
            for k in ks {
                let r = recall_from_ranks(&ranks, k);
                metrics.insert(format!("recall@{k}/text_to_image"), r.text_to_image);
                metrics.insert(format!("recall@{k}/image_to_text"), r.image_to_text);
            }
        }
        Task::CaptionChoice { task, .. } => {
            let s = caption_choice(model, task)?;
            metrics.insert("micro".to_string(), s.micro);
            metrics.insert("macro".to_string(), s.macro_average);
            for (g, v) in s.per_group {
                metrics.insert(format!("group/{g}"), v);
            }
        }
    }
    Ok(Report {
        task: task.name().to_string(),
        kind: task.kind(),
        items: task.len(),
        metrics,
        config_digest: None,
    })
}

/// Reports for every task, in order.
pub fn evaluate_all<E: Encoder + ?Sized>(model: &E, tasks: &[Task]) -> Result<Vec<Report>, EvalError> {
    tasks.iter().map(|t| evaluate(model, t)).collect()
}

/// TOML task descriptor. Paths are relative to the descriptor's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDescriptor {
    pub name: String,
    pub kind: TaskKind,
    /// JSONL item file.
    pub items: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    /// One template per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<ClassMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Suite {
    task: Vec<TaskDescriptor>,
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> EvalError {
    let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
    EvalError::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.message().to_string(),
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| EvalError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Templates, one per line; blank lines and `#` comments are skipped.
pub fn read_templates(path: &Path) -> Result<Vec<String>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        check_template(t).map_err(|_| EvalError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("template {t:?} must contain exactly one \"{{}}\""),
        })?;
        out.push(t.to_string());
    }
    Ok(out)
}

impl TaskDescriptor {
    /// Reads the item and template files named by the descriptor.
    pub fn load(&self, base: &Path) -> Result<Task, EvalError> {
        let items_path = base.join(&self.items);
        let name = self.name.clone();
        let task = match self.kind {
            TaskKind::Classification => {
                let templates = match &self.templates {
                    Some(p) => read_templates(&base.join(p))?,
                    None => Vec::new(),
                };
                let task = ClassificationTask {
                    classes: self.classes.clone(),
                    templates,
                    items: read_jsonl(&items_path)?,
                    metric: self.metric.unwrap_or(ClassMetric::Top1),
                };
                task.validate()?;
                Task::Classification { name, task }
            }
            TaskKind::Retrieval => {
                let task = RetrievalTask {
                    items: read_jsonl(&items_path)?,
                    k: self.k.unwrap_or(5),
                };
                task.validate()?;
                Task::Retrieval { name, task }
            }
            TaskKind::CaptionChoice => {
                let task = CaptionChoiceTask {
                    items: read_jsonl(&items_path)?,
                };
                task.validate()?;
                Task::CaptionChoice { name, task }
            }
        };
        Ok(task)
    }
}

/// Loads a single-task descriptor.
pub fn load_task(path: &Path) -> Result<Task, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let desc: TaskDescriptor = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    desc.load(path.parent().unwrap_or(Path::new(".")))
}

/// Loads either a single descriptor or a suite of `[[task]]` tables.
pub fn load_tasks(path: &Path) -> Result<Vec<Task>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let table: toml::Table = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    if table.contains_key("task") {
        let suite: Suite = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
        return suite.task.iter().map(|d| d.load(base)).collect();
    }
    let desc: TaskDescriptor = toml::from_str(&text).map_err(|e| toml_error(path, &text, e))?;
    Ok(vec![desc.load(base)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    /// Looks embeddings up by exact string; images by their first feature.
    struct Table {
        texts: HashMap<String, Vec<f64>>,
    }

    impl Encoder for Table {
        fn embed_text(&self, caption: &str) -> Result<Array1<f64>, EvalError> {
            let v = self.texts.get(caption).ok_or_else(|| EvalError::InvalidTask(caption.to_string()))?;
            Ok(Array1::from(v.clone()))
        }
        fn embed_image(&self, features: &[f32]) -> Result<Array1<f64>, EvalError> {
            let v: Array1<f64> = features.iter().map(|&x| x as f64).collect();
            normalize(v.view(), "image")
        }
    }

    fn table(entries: &[(&str, [f64; 2])]) -> Table {
        Table {
            texts: entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect(),
        }
    }

    #[test]
    fn class_embedding_rules() {
        let s = 0.5f64.sqrt();
        let m = table(&[("a dog", [1.0, 0.0]), ("the dog", [0.0, 1.0]), ("no dog", [-1.0, 0.0]), ("dog", [s, s])]);
        let one = class_embedding(&m, "dog", &["a {}".to_string()]).unwrap();
        assert_eq!(one, m.embed_text("a dog").unwrap());
        let twice = class_embedding(&m, "dog", &["a {}".to_string(), "a {}".to_string()]).unwrap();
        assert_eq!(twice, one);
        let mixed = class_embedding(&m, "dog", &["a {}".to_string(), "the {}".to_string()]).unwrap();
        assert!((mixed[0] - s).abs() < 1e-12 && (mixed[1] - s).abs() < 1e-12);
        let err = class_embedding(&m, "dog", &["a {}".to_string(), "no {}".to_string()]).unwrap_err();
        assert!(matches!(err, EvalError::DegenerateEmbedding(_)));
        let err = class_embedding(&m, "dog", &["{} {}".to_string()]).unwrap_err();
        assert!(matches!(err, EvalError::BadTemplate(_)));
        assert_eq!(class_embedding(&m, "dog", &[]).unwrap(), m.embed_text("dog").unwrap());
    }

    #[test]
    fn single_class_is_always_right() {
        let m = table(&[("cat", [1.0, 0.0])]);
        let task = ClassificationTask {
            classes: vec!["cat".into()],
            templates: vec![],
            items: (0..5)
                .map(|i| ClassItem {
                    image_features: vec![i as f32 - 2.0, 1.0],
                    label: Label::Index(0),
                })
                .collect(),
            metric: ClassMetric::Top1,
        };
        assert_eq!(zero_shot_classify(&m, &task).unwrap(), 1.0);
    }

    #[test]
    fn tied_negative_is_wrong() {
        let m = table(&[("dog chases cat", [1.0, 0.0]), ("cat chases dog", [1.0, 0.0])]);
        let task = CaptionChoiceTask {
            items: vec![ChoiceItem {
                image_features: vec![1.0, 0.0],
                positive: "dog chases cat".into(),
                negatives: vec!["cat chases dog".into()],
                group: None,
            }],
        };
        let s = caption_choice(&m, &task).unwrap();
        assert_eq!(s.micro, 0.0);
        assert_eq!(s.per_group.keys().collect::<Vec<_>>(), vec![DEFAULT_GROUP]);
    }

    #[test]
    fn descriptor_files() {
        let dir = tempfile::TempDir::new().unwrap();
        let d = dir.path();
        std::fs::write(d.join("t.txt"), "# prompts\na photo of a {}\n\n").unwrap();
        std::fs::write(
            d.join("c.jsonl"),
            "{\"image_features\":[1.0,0.0],\"label\":\"dog\"}\n{\"image_features\":[0.0,1.0],\"label\":1}\n",
        )
        .unwrap();
        std::fs::write(
            d.join("suite.toml"),
            "[[task]]\nname = \"rec\"\nkind = \"classification\"\nitems = \"c.jsonl\"\nclasses = [\"dog\", \"cat\"]\ntemplates = \"t.txt\"\n",
        )
        .unwrap();
        let tasks = load_tasks(&d.join("suite.toml")).unwrap();
        assert_eq!(tasks.len(), 1);
        let m = table(&[("a photo of a dog", [1.0, 0.0]), ("a photo of a cat", [0.0, 1.0])]);
        let r = evaluate(&m, &tasks[0]).unwrap();
        assert_eq!(r.metrics["top1"], 1.0);
        assert_eq!(r.items, 2);

        std::fs::write(d.join("bad.toml"), "name = \"x\"\nkind = \"classification\"\nitems = 3\n").unwrap();
        match load_task(&d.join("bad.toml")).unwrap_err() {
            EvalError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        std::fs::write(d.join("bad.txt"), "no placeholder\n").unwrap();
        assert!(matches!(read_templates(&d.join("bad.txt")), Err(EvalError::Parse { line: 1, .. })));
    }
}
