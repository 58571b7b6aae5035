use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    default_vocab, vocab_sidecar, BuildFreqArgs, CliError, Context, DemoArgs, EvalArgs, GenNegativesArgs, Mixing, PatchArgs, RunManifest,
    SampleArgs, SweepArgs, Switch, TrainArgs,
};
use crate::datapipe::{
    attach_negatives_batch, combine, expand_globs, open_shards, read_shard, sample_stream,
    spawn_sampler, write_jsonl, CaptionRecord, Combination, NegativeAttacher, PipeError, ShardOptions, ShardSet,
};
use crate::demo::{demo_tradeoff, DemoConfig, DemoError};
use crate::evalharness::{evaluate_all, load_tasks, EvalError, Report, TowerModel};
use crate::negatives::{FrequencyTable, GenerateConfig};
use crate::patcher::{default_alphas, patch_with_info, write_sweep_csv, Checkpoint, Digest, PatchError};
use crate::trainer::{
    load_checkpoint, save_checkpoint, write_metrics_csv, TowerParams, TrainConfig, TrainError, TrainExample, Vocab,
};
use crate::wordnet::{load_or_bundled, WordNetDB};

fn rt(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn patch_err(e: PatchError) -> CliError {
    match e {
        PatchError::AlphaOutOfRange(_) => CliError::Usage(e.to_string()),
        e => rt(e),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match &e {
        EvalError::Parse { path, .. } if path.extension().is_some_and(|x| x == "toml") => CliError::Usage(e.to_string()),
        EvalError::BadTemplate(_) | EvalError::InvalidTask(_) => CliError::Usage(e.to_string()),
        _ => rt(e),
    }
}

fn train_err(e: TrainError) -> CliError {
    match e {
        TrainError::Config(_) => CliError::Usage(e.to_string()),
        e => rt(e),
    }
}

/// Reads a TOML file into `T`; syntax and schema errors are usage errors
/// that name the line.
fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1);
        CliError::Usage(format!("{}:{line}: {}", path.display(), e.message()))
    })
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

fn shard_files(ctx: &Context, patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let resolved: Vec<String> = patterns.iter().map(|p| ctx.pattern(p)).collect();
    let files = expand_globs(&resolved).map_err(rt)?;
    if files.is_empty() {
        return Err(CliError::Usage(format!("no files match {patterns:?}")));
    }
    Ok(files)
}

fn load_db(ctx: &Context, dir: Option<&Path>) -> Result<std::borrow::Cow<'static, WordNetDB>, CliError> {
    load_or_bundled(dir.map(|d| ctx.path(d)).as_deref()).map_err(rt)
}

fn read_freq(path: &Path) -> Result<FrequencyTable, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    FrequencyTable::read_tsv(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_records(path: &Path, records: &[CaptionRecord]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_jsonl(&mut out, records).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn input_all(m: &mut RunManifest, paths: &[PathBuf]) -> Result<(), CliError> {
    paths.iter().try_for_each(|p| m.input(p))
}

pub fn build_freq(ctx: &Context, a: BuildFreqArgs) -> Result<(), CliError> {
    let files = shard_files(ctx, &a.input)?;
    let out = ctx.path(&a.output);
    let mut m = RunManifest::start("build-freq", serde_json::json!({ "input": a.input }), None);
    input_all(&mut m, &files)?;
    let mut records = Vec::new();
    for path in &files {
        records.extend(read_shard(path, None).map_err(rt)?);
    }
    let freq = FrequencyTable::from_captions(records.iter().map(|r| r.caption.as_str()));
    ensure_parent(&out)?;
    let mut text = Vec::new();
    freq.write_tsv(&mut text).map_err(io_err(&out))?;
    fs::write(&out, text).map_err(io_err(&out))?;
    log::info!("{} words, {} tokens", freq.len(), freq.total());
    m.output(&out)?;
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

pub fn gen_negatives(ctx: &Context, a: GenNegativesArgs) -> Result<(), CliError> {
    let mut config: GenerateConfig = match &a.config {
        Some(p) => read_toml(&ctx.path(p))?,
        None => GenerateConfig::default(),
    };
    if let Some(s) = a.strategies {
        config.weights = vec![1.0; s.len()];
        config.strategies = s;
    }
    if let Some(w) = a.weights {
        config.weights = w;
    }
    if let Some(n) = a.per_caption {
        config.per_caption = n;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let files = shard_files(ctx, &a.input)?;
    let freq_path = ctx.path(&a.freq);
    let out = ctx.path(&a.output);
    let mut m = RunManifest::start("gen-negatives", &config, Some(a.seed));
    input_all(&mut m, &files)?;
    m.input(&freq_path)?;
    let db = load_db(ctx, a.wordnet.as_deref())?;
    let freq = read_freq(&freq_path)?;
    let attacher = NegativeAttacher {
        db: &db,
        freq: &freq,
        config,
        seed: a.seed,
        parallel: !ctx.strict,
    };
    let mut records = Vec::new();
    for path in &files {
        records.extend(read_shard(path, None).map_err(rt)?);
    }
    let records = attach_negatives_batch(records, &attacher);
    write_records(&out, &records)?;
    m.output(&out)?;
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

fn open_datasets(ctx: &Context, patterns: &[String], mixing: Mixing, options: ShardOptions) -> Result<(ShardSet, Vec<PathBuf>), CliError> {
    let mut sets = Vec::new();
    let mut all = Vec::new();
    for pattern in patterns {
        let files = shard_files(ctx, std::slice::from_ref(pattern))?;
        sets.push(open_shards(&files, options).map_err(rt)?);
        all.extend(files);
    }
    let mode = match mixing {
        Mixing::Concatenate => Combination::Concatenate,
        Mixing::Uniform => Combination::Uniform,
    };
    Ok((combine(sets, mode).map_err(rt)?, all))
}

pub fn pipe_sample(ctx: &Context, a: SampleArgs) -> Result<(), CliError> {
    let (set, files) = open_datasets(ctx, &a.shards, a.mixing, ShardOptions::default())?;
    let mut m = RunManifest::start(
        "pipe sample",
        serde_json::json!({ "shards": a.shards, "n": a.n, "mixing": format!("{:?}", a.mixing) }),
        Some(a.seed),
    );
    input_all(&mut m, &files)?;
    let records: Vec<CaptionRecord> = sample_stream(&set, a.seed, a.n).map_err(rt)?.collect::<Result<_, _>>().map_err(rt)?;
    match &a.output {
        Some(p) => {
            let out = ctx.path(p);
            write_records(&out, &records)?;
            m.output(&out)?;
            m.finish(&RunManifest::path_for(&out))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_jsonl(&mut lock, &records).map_err(rt)?;
            lock.flush().map_err(rt)?;
            fs::create_dir_all(&ctx.workdir).map_err(io_err(&ctx.workdir))?;
            m.finish(&ctx.workdir.join("pipe-sample.manifest.json"))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainManifestConfig<'a> {
    train: &'a TrainConfig,
    shards: &'a [String],
    init: Option<String>,
    on_the_fly_negatives: bool,
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<(), CliError> {
    let mut config: TrainConfig = match &a.config {
        Some(p) => read_toml(&ctx.path(p))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.negatives {
        config.negatives_enabled = n == Switch::On;
    }

    let files = shard_files(ctx, &a.shards)?;
    let out = ctx.path(&a.out);
    let mut m = RunManifest::start("train", serde_json::Value::Null, Some(config.seed));
    input_all(&mut m, &files)?;

    let freq = match &a.freq {
        Some(p) if config.negatives_enabled => {
            let p = ctx.path(p);
            m.input(&p)?;
            Some(read_freq(&p)?)
        }
        _ => None,
    };
    let vocab = match &a.vocab {
        Some(p) => {
            let p = ctx.path(p);
            m.input(&p)?;
            Vocab::load(&p).map_err(rt)?
        }
        None => {
            let mut records = Vec::new();
            for f in &files {
                records.extend(read_shard(f, None).map_err(rt)?);
            }
            let mut words: Vec<String> = Vec::new();
            if let Some(freq) = &freq {
                words.extend(freq.sorted().into_iter().map(|(w, _)| w.to_string()));
            }
            Vocab::from_captions(
                records
                    .iter()
                    .flat_map(|r| std::iter::once(r.caption.as_str()).chain(r.negative_texts()))
                    .chain(words.iter().map(String::as_str)),
            )
        }
    };
    let init = match &a.init {
        Some(p) => {
            let p = ctx.path(p);
            m.input(&p)?;
            let params = load_checkpoint(&p, None).map_err(rt)?;
            config.model = params.config();
            Some(params)
        }
        None => None,
    };
    if config.model.vocab_size == 0 {
        config.model.vocab_size = vocab.len();
    }
    if vocab.len() > config.model.vocab_size {
        return Err(CliError::Usage(format!(
            "vocabulary has {} words but the model has {} embedding rows",
            vocab.len(),
            config.model.vocab_size
        )));
    }
    config.validate().map_err(train_err)?;
    m.config = serde_json::to_value(TrainManifestConfig {
        train: &config,
        shards: &a.shards,
        init: a.init.as_ref().map(|p| p.display().to_string()),
        on_the_fly_negatives: freq.is_some(),
    })
    .expect("serializable config");

    let (set, _) = open_datasets(
        ctx,
        &a.shards,
        Mixing::Concatenate,
        ShardOptions {
            feature_dim: Some(config.model.d_img),
            ..ShardOptions::default()
        },
    )?;
    let n = config.total_steps * config.batch_size;
    let db = load_db(ctx, a.wordnet.as_deref())?;
    let attacher = freq.as_ref().map(|freq| NegativeAttacher {
        db: &db,
        freq,
        config: GenerateConfig::default(),
        seed: config.seed,
        parallel: !ctx.strict,
    });
    let records: Box<dyn Iterator<Item = Result<CaptionRecord, PipeError>>> = if ctx.strict {
        Box::new(sample_stream(&set, config.seed, n).map_err(rt)?)
    } else {
        Box::new(spawn_sampler(set, config.seed, n, 4 * config.batch_size).map_err(rt)?.into_iter())
    };
    // On-the-fly generation only touches records that arrive without negatives.
    let to_example = |r: Result<CaptionRecord, PipeError>| -> Result<TrainExample, TrainError> {
        let mut r = r.map_err(|e| TrainError::Data(e.to_string()))?;
        if let Some(att) = &attacher {
            if r.negatives.as_ref().is_none_or(|n| n.is_empty()) {
                r = att.attach(r);
            }
        }
        TrainExample::from_record(&r, &vocab)
    };
    let init_given = init.is_some();
    let (params, log) = crate::trainer::train(config.clone(), records.map(to_example), init, |_, s| {
        if s.step % config.log_every.max(1) == 0 {
            log::info!("step {} loss {:.4} lr {:.2e} temperature {:.2}", s.step, s.loss, s.lr, s.temperature);
        }
        Ok(())
    })
    .map_err(rt)?;
    log::info!("trained {} steps (fine-tune: {init_given})", log.last().map_or(0, |s| s.step));

    ensure_parent(&out)?;
    save_checkpoint(&params, &out).map_err(rt)?;
    let vocab_out = vocab_sidecar(&out);
    vocab.save(&vocab_out).map_err(rt)?;
    let metrics = a.metrics.as_ref().map_or_else(|| out.with_extension("metrics.csv"), |p| ctx.path(p));
    ensure_parent(&metrics)?;
    write_metrics_csv(&metrics, &log).map_err(rt)?;
    for p in [&out, &vocab_out, &metrics] {
        m.output(p)?;
    }
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

pub fn patch(ctx: &Context, a: PatchArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&a.alpha) {
        return Err(patch_err(PatchError::AlphaOutOfRange(a.alpha)));
    }
    let (pt_path, ft_path, out) = (ctx.path(&a.pt), ctx.path(&a.ft), ctx.path(&a.out));
    let mut m = RunManifest::start("patch", serde_json::Value::Null, None);
    m.input(&pt_path)?;
    m.input(&ft_path)?;
    let pt = Checkpoint::load(&pt_path).map_err(rt)?;
    let ft = Checkpoint::load(&ft_path).map_err(rt)?;
    let (patched, info) = patch_with_info(&pt, &ft, a.alpha).map_err(patch_err)?;
    ensure_parent(&out)?;
    patched.save(&out).map_err(rt)?;
    m.config = serde_json::to_value(&info).expect("serializable patch info");
    m.output(&out)?;
    // Patched models keep the vocabulary of their endpoints.
    if let Some(pt_vocab) = default_vocab(&pt_path) {
        let vocab_out = vocab_sidecar(&out);
        fs::copy(&pt_vocab, &vocab_out).map_err(io_err(&vocab_out))?;
        m.output(&vocab_out)?;
    }
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

fn load_vocab(ctx: &Context, given: Option<&Path>, checkpoint: &Path, m: &mut RunManifest) -> Result<Vocab, CliError> {
    let path = match given {
        Some(p) => ctx.path(p),
        None => default_vocab(checkpoint).ok_or_else(|| {
            CliError::Usage(format!("no vocabulary beside {}; pass --vocab", checkpoint.display()))
        })?,
    };
    if !path.exists() {
        return Err(CliError::Usage(format!("vocabulary {} not found", path.display())));
    }
    m.input(&path)?;
    Vocab::load(&path).map_err(rt)
}

/// Metrics of every task as `task.metric`.
fn flat_metrics(reports: &[Report]) -> Vec<(String, f64)> {
    reports
        .iter()
        .flat_map(|r| r.metrics.iter().map(move |(k, v)| (format!("{}.{k}", r.task), *v)))
        .collect()
}

pub fn sweep(ctx: &Context, a: SweepArgs) -> Result<(), CliError> {
    let alphas = match &a.alphas {
        Some(list) => list.clone(),
        None => default_alphas(a.step).map_err(patch_err)?,
    };
    if let Some(&bad) = alphas.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(patch_err(PatchError::AlphaOutOfRange(bad)));
    }
    let (pt_path, ft_path, tasks_path, out) = (ctx.path(&a.pt), ctx.path(&a.ft), ctx.path(&a.tasks), ctx.path(&a.out));
    let mut m = RunManifest::start(
        "sweep",
        serde_json::json!({ "alphas": alphas, "tasks": a.tasks.display().to_string() }),
        None,
    );
    m.input(&pt_path)?;
    m.input(&ft_path)?;
    m.input(&tasks_path)?;
    let vocab = load_vocab(ctx, a.vocab.as_deref(), &pt_path, &mut m)?;
    let tasks = load_tasks(&tasks_path).map_err(eval_err)?;
    let pt = Checkpoint::load(&pt_path).map_err(rt)?;
    let ft = Checkpoint::load(&ft_path).map_err(rt)?;
    let result = crate::patcher::sweep(&pt, &ft, &alphas, !ctx.strict, |_, ckpt| {
        let params = TowerParams::from_checkpoint(ckpt, None).map_err(|e| PatchError::Eval(e.to_string()))?;
        let model = TowerModel::new(&params, vocab.clone()).map_err(|e| PatchError::Eval(e.to_string()))?;
        let reports = evaluate_all(&model, &tasks).map_err(|e| PatchError::Eval(e.to_string()))?;
        Ok(flat_metrics(&reports))
    })
    .map_err(patch_err)?;
    ensure_parent(&out)?;
    write_sweep_csv(&result, &out).map_err(rt)?;
    m.output(&out)?;
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

pub fn eval(ctx: &Context, a: EvalArgs) -> Result<(), CliError> {
    let (model_path, task_path, out) = (ctx.path(&a.model), ctx.path(&a.task), ctx.path(&a.out));
    let mut m = RunManifest::start("eval", serde_json::json!({ "task": a.task.display().to_string() }), None);
    m.input(&model_path)?;
    m.input(&task_path)?;
    let vocab = load_vocab(ctx, a.vocab.as_deref(), &model_path, &mut m)?;
    let tasks = load_tasks(&task_path).map_err(eval_err)?;
    let params = load_checkpoint(&model_path, None).map_err(rt)?;
    let model = TowerModel::new(&params, vocab).map_err(eval_err)?;
    let digest = Digest::of_file(&task_path).map_err(io_err(&task_path))?;
    let mut reports = evaluate_all(&model, &tasks).map_err(eval_err)?;
    for r in &mut reports {
        r.config_digest = Some(digest);
        for (k, v) in &r.metrics {
            println!("{}\t{k}\t{v:.4}", r.task);
        }
    }
    let text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(&reports)
    }
    .expect("serializable report");
    ensure_parent(&out)?;
    fs::write(&out, text + "\n").map_err(io_err(&out))?;
    m.output(&out)?;
    m.finish(&RunManifest::path_for(&out))?;
    Ok(())
}

fn demo_err(e: DemoError) -> CliError {
    match e {
        DemoError::Config(_) => CliError::Usage(e.to_string()),
        DemoError::Patch(p) => patch_err(p),
        DemoError::Train(t) => train_err(t),
        e => rt(e),
    }
}

pub fn demo(ctx: &Context, a: DemoArgs) -> Result<(), CliError> {
    let mut config: DemoConfig = match &a.config {
        Some(p) => read_toml(&ctx.path(p))?,
        None => DemoConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.ablation |= a.ablation;
    config.strict_determinism |= ctx.strict;
    let dir = ctx.path(&a.out);
    let mut m = RunManifest::start("demo-tradeoff", &config, Some(config.seed));
    let db = load_db(ctx, a.wordnet.as_deref())?;
    let summary = demo_tradeoff(&dir, &config, &db).map_err(demo_err)?;
    for check in &summary.checks {
        println!("{} {:<22} {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    let mut outputs: Vec<PathBuf> = Vec::new();
    collect_files(&dir, &mut outputs).map_err(io_err(&dir))?;
    outputs.sort();
    for p in outputs.iter().filter(|p| !p.to_string_lossy().ends_with(".manifest.json")) {
        m.output(p)?;
    }
    m.finish(&dir.join("demo.manifest.json"))?;
    if a.check && !summary.passed {
        let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        return Err(CliError::CheckFailed(failed.join(", ")));
    }
    Ok(())
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}
