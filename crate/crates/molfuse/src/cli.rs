//! Command implementations behind the binary: featurize, pretrain, finetune,
//! eval, case-study, export-attention, tokenize-train.
//!
//! Every run directory receives the resolved configuration (including the
//! seed), so identical invocations reproduce identical artifacts. The
//! featurization cache root comes from `MOLFUSE_CACHE_DIR` or
//! `paths.cache_dir`; without either, caching is off.

use crate::cache::{self, CachedViews};
use crate::checkpoint::{self, Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig, SplitMethod, TaskKind};
use crate::dataset::{load_dataset, read_smiles_column, DataError, Dataset};
use crate::encoders::View;
use crate::featurize::{BpeVocab, VocabError};
use crate::fusion::{alpha_csv, FusionMode, FusionState};
use crate::pipeline::{
    self, case_study_chirality, case_study_rings, case_study_table, embed_molecule, eval_alpha,
    metric, random_split, scaffold_split, DatasetSplit, MetricKind, PipelineError,
    CHIRALITY_AP_REFERENCE, RING_MAE_REFERENCE,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CACHE_ENV_VAR: &str = "MOLFUSE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Cache(#[from] crate::cache::CacheError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Usage(String),
    #[error("io error at {path}: {msg}")]
    Io { path: String, msg: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.display().to_string(), msg: e.to_string() }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub views: Option<Vec<View>>,
    pub fusion: Option<FusionMode>,
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(views) = &overrides.views {
        cfg.views = views.clone();
    }
    if let Some(mode) = overrides.fusion {
        cfg.fusion_mode = mode;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_resolved(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_text(&dir.join("resolved_config.txt"), &cfg.resolved_text())
}

/// Vocabulary: an explicit file when configured, otherwise trained
/// deterministically on the dataset's SMILES column. `model.vocab_size` is
/// the embedding-table budget, so the training target reserves room for the
/// four special ids and loaded files must fit under it.
pub fn resolve_vocab(cfg: &RunConfig) -> Result<BpeVocab, CliError> {
    let vocab = if let Some(path) = &cfg.vocab_path {
        let p = Path::new(path);
        let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        BpeVocab::from_json(&text)?
    } else {
        let csv = cfg
            .dataset_csv
            .as_ref()
            .ok_or_else(|| CliError::Usage("no paths.vocab and no dataset.csv to train a tokenizer on".into()))?;
        let corpus = read_smiles_column(Path::new(csv))?;
        BpeVocab::train(&corpus, cfg.model.vocab_size.saturating_sub(4))?
    };
    if vocab.n_ids() > cfg.model.vocab_size {
        return Err(CliError::Usage(format!(
            "vocabulary has {} ids but model.vocab_size is {}",
            vocab.n_ids(),
            cfg.model.vocab_size
        )));
    }
    Ok(vocab)
}

fn cache_file(cfg: &RunConfig) -> Option<PathBuf> {
    let root = std::env::var(CACHE_ENV_VAR).ok().or_else(|| cfg.cache_dir.clone())?;
    Some(PathBuf::from(root).join(format!("{}.views.tsv", cfg.dataset_name)))
}

fn build_split(cfg: &RunConfig, data: &Dataset) -> DatasetSplit {
    match cfg.split_method {
        SplitMethod::Scaffold => {
            let keys: Vec<String> = data.molecules.iter().map(|m| m.scaffold_key.clone()).collect();
            scaffold_split(&keys, cfg.split_train, cfg.split_valid, cfg.seed)
        }
        SplitMethod::Random => random_split(data.molecules.len(), cfg.split_train, cfg.split_valid, cfg.seed),
    }
}

fn load_checkpoint_validated(cfg: &RunConfig) -> Result<Checkpoint, CliError> {
    let path = cfg
        .checkpoint_path
        .as_ref()
        .ok_or_else(|| CliError::Usage("paths.checkpoint is required for this command".into()))?;
    let ck = checkpoint::load(Path::new(path))?;
    let reference = pipeline::init_model_params(&cfg.model, 0);
    checkpoint::validate(&ck, cfg.architecture_hash(), &reference)?;
    Ok(ck)
}

// ---- commands ----

pub struct FeaturizeStats {
    pub parsed: usize,
    pub skipped: usize,
    pub cache_hits: usize,
    pub cache_new: usize,
    pub audited: usize,
}

impl std::fmt::Display for FeaturizeStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "parsed={} skipped={} cache_hits={} cache_new={} audited={}",
            self.parsed, self.skipped, self.cache_hits, self.cache_new, self.audited
        )
    }
}

/// Populate the featurization cache and report counts. Parse failures above
/// the configured threshold abort with an error before any cache write.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<FeaturizeStats, CliError> {
    let vocab = resolve_vocab(cfg)?;
    let data = load_dataset(cfg, &vocab)?;
    for (row, reason) in &data.skipped {
        eprintln!("skipping row {row}: {reason}");
    }
    let mut stats = FeaturizeStats {
        parsed: data.molecules.len(),
        skipped: data.skipped.len(),
        cache_hits: 0,
        cache_new: 0,
        audited: 0,
    };
    if let Some(path) = cache_file(cfg) {
        let hash = cfg.featurizer_hash(&vocab.to_json());
        let (existing, _stale) = cache::load(&path, hash)?;
        let fresh: Vec<(String, CachedViews)> = data
            .molecules
            .iter()
            .map(|m| (m.key.clone(), CachedViews::of(m)))
            .collect();
        stats.audited = cache::audit(&existing, &fresh, 3)?;
        let mut new_entries = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (key, views) in fresh {
            if existing.contains_key(&key) {
                stats.cache_hits += 1;
            } else if seen.insert(key.clone()) {
                new_entries.push((key, views));
            }
        }
        stats.cache_new = new_entries.len();
        cache::append(&path, hash, &new_entries)?;
    }
    Ok(stats)
}

/// Pretrain and write `checkpoint.bin`, `train_log.csv`, `mlm_log.csv`,
/// `alpha.csv`, and the resolved config into the run directory.
pub fn cmd_pretrain(cfg: &RunConfig, dry_run: bool) -> Result<String, CliError> {
    if cfg.dataset_csv.is_none() {
        return Err(CliError::Usage("dataset.csv is required for pretraining".into()));
    }
    let dir = out_dir(cfg)?;
    write_resolved(cfg, &dir)?;
    let vocab = resolve_vocab(cfg)?;
    write_text(&dir.join("vocab.json"), &vocab.to_json())?;
    let data = load_dataset(cfg, &vocab)?;
    for (row, reason) in &data.skipped {
        eprintln!("skipping row {row}: {reason}");
    }
    if dry_run {
        return Ok(format!(
            "dry run: would pretrain on {} molecules for {} epochs (batch {}, views {}, fusion {}) into {}",
            data.molecules.len(),
            cfg.epochs,
            cfg.batch_size,
            cfg.views.iter().map(|v| v.label()).collect::<Vec<_>>().join(","),
            cfg.fusion_mode.label(),
            dir.display()
        ));
    }

    let mut ps = pipeline::init_model_params(&cfg.model, cfg.seed);
    let log_path = dir.join("train_log.csv");
    let mut log = std::fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
    writeln!(log, "epoch,loss,lr,wall_ms").map_err(|e| io_err(&log_path, e))?;
    let outcome = pipeline::pretrain(cfg, &data.molecules, &mut ps, Some(&mut log))?;

    if !outcome.mlm_trace.is_empty() {
        let mut text = String::from("epoch,loss\n");
        for (e, l) in outcome.mlm_trace.iter().enumerate() {
            text.push_str(&format!("{e},{l}\n"));
        }
        write_text(&dir.join("mlm_log.csv"), &text)?;
    }

    let fusion = FusionState {
        mode: cfg.fusion_mode,
        frozen: false,
        cached_alpha: outcome.final_alpha.clone(),
    };
    checkpoint::save(&dir.join("checkpoint.bin"), &ps, cfg.architecture_hash(), &fusion)?;
    if let Some(alpha) = &outcome.final_alpha {
        write_text(&dir.join("alpha.csv"), &alpha_csv(&cfg.views, alpha))?;
    }
    let first = outcome.loss_trace.first().copied().unwrap_or(0.0);
    let last = outcome.loss_trace.last().copied().unwrap_or(0.0);
    Ok(format!(
        "pretrained {} molecules for {} epochs: loss {first:.4} -> {last:.4}; artifacts in {}",
        data.molecules.len(),
        outcome.loss_trace.len(),
        dir.display()
    ))
}

/// Fine-tune from a checkpoint and write metrics plus per-seed checkpoints.
pub fn cmd_finetune(cfg: &RunConfig, dry_run: bool) -> Result<String, CliError> {
    let ck = load_checkpoint_validated(cfg)?;
    let dir = out_dir(cfg)?;
    write_resolved(cfg, &dir)?;
    let vocab = resolve_vocab(cfg)?;
    write_text(&dir.join("vocab.json"), &vocab.to_json())?;
    let data = load_dataset(cfg, &vocab)?;
    for (row, reason) in &data.skipped {
        eprintln!("skipping row {row}: {reason}");
    }
    let split = build_split(cfg, &data);
    for w in &split.warnings {
        eprintln!("split warning: {w}");
    }
    if dry_run {
        return Ok(format!(
            "dry run: would fine-tune {} tasks on {}/{}/{} molecules over seeds {:?} into {}",
            data.n_tasks(),
            split.train.len(),
            split.valid.len(),
            split.test.len(),
            cfg.seeds,
            dir.display()
        ));
    }

    let log_path = dir.join("train_log.csv");
    let mut log = std::fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
    writeln!(log, "epoch,loss,lr,wall_ms").map_err(|e| io_err(&log_path, e))?;
    let outcome = pipeline::finetune(cfg, &data, &split, &ck.params, Some(&mut log))?;

    write_text(&dir.join("metrics.csv"), &outcome.report.to_csv())?;
    write_text(&dir.join("metrics.txt"), &outcome.report.to_text())?;
    for ((seed, params), alpha) in cfg
        .seeds
        .iter()
        .zip(&outcome.per_seed_params)
        .zip(&outcome.per_seed_alpha)
    {
        let fusion = FusionState {
            mode: cfg.fusion_mode,
            frozen: cfg.fusion_mode == FusionMode::Frozen,
            cached_alpha: alpha.clone(),
        };
        checkpoint::save(&dir.join(format!("checkpoint_seed{seed}.bin")), params, cfg.architecture_hash(), &fusion)?;
        if let Some(alpha) = alpha {
            write_text(&dir.join(format!("alpha_seed{seed}.csv")), &alpha_csv(&cfg.views, alpha))?;
        }
    }
    Ok(format!(
        "fine-tuned over seeds {:?}: overall {} = {:.4} ± {:.4}; artifacts in {}",
        cfg.seeds,
        outcome.report.metric.label(),
        outcome.report.overall.mean,
        outcome.report.overall.std,
        dir.display()
    ))
}

/// Evaluate a fine-tuned checkpoint (with task head) on a dataset.
pub fn cmd_eval(cfg: &RunConfig) -> Result<String, CliError> {
    let ck = load_checkpoint_validated(cfg)?;
    if !ck.params.contains("head.w") {
        return Err(CliError::Usage(
            "checkpoint has no task head; run finetune first or point paths.checkpoint at a fine-tuned one".into(),
        ));
    }
    let dir = out_dir(cfg)?;
    write_resolved(cfg, &dir)?;
    let vocab = resolve_vocab(cfg)?;
    let data = load_dataset(cfg, &vocab)?;
    let mols: Vec<&crate::featurize::MolViews> = data.molecules.iter().map(|m| &m.views).collect();
    let pred = pipeline::predict(&ck.params, &cfg.model, &cfg.views, cfg.fusion_mode, &mols)?;

    let kind = match data.task {
        TaskKind::Classify => MetricKind::RocAuc,
        TaskKind::Regress => MetricKind::Rmse,
    };
    let mut csv = String::from("task,metric,value\n");
    let mut values = Vec::new();
    for (t, name) in data.label_names.iter().enumerate() {
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        for (k, m) in data.molecules.iter().enumerate() {
            if let Some(y) = m.labels[t] {
                let raw = pred.logits[k][t];
                preds.push(if data.task == TaskKind::Classify { pipeline::sigmoid(raw) } else { raw });
                targets.push(y);
            }
        }
        match metric(&preds, &targets, kind) {
            Ok(v) => {
                csv.push_str(&format!("{name},{},{v}\n", kind.label()));
                values.push(v);
            }
            Err(e) => csv.push_str(&format!("{name},{},error: {e}\n", kind.label())),
        }
    }
    write_text(&dir.join("eval_metrics.csv"), &csv)?;

    let mut pred_csv = String::from("row,task,prediction\n");
    for (k, m) in data.molecules.iter().enumerate() {
        for (t, name) in data.label_names.iter().enumerate() {
            let raw = pred.logits[k][t];
            let p = if data.task == TaskKind::Classify { pipeline::sigmoid(raw) } else { raw };
            pred_csv.push_str(&format!("{},{name},{p}\n", m.row));
        }
    }
    write_text(&dir.join("predictions.csv"), &pred_csv)?;
    let mean = if values.is_empty() { f64::NAN } else { values.iter().sum::<f64>() / values.len() as f64 };
    Ok(format!(
        "evaluated {} molecules on {} tasks: mean {} = {mean:.4}; artifacts in {}",
        data.molecules.len(),
        data.label_names.len(),
        kind.label(),
        dir.display()
    ))
}

/// Probe case studies on frozen embeddings: chiral-center classification (AP,
/// labels from the dataset's first label column) and aromatic-ring counting
/// (MAE, targets computed from the parsed graphs).
pub fn cmd_case_study(cfg: &RunConfig) -> Result<String, CliError> {
    let dir = out_dir(cfg)?;
    write_resolved(cfg, &dir)?;
    let vocab = resolve_vocab(cfg)?;
    let data = load_dataset(cfg, &vocab)?;
    if data.molecules.len() < 10 {
        return Err(CliError::Usage(format!(
            "case studies need at least 10 molecules, got {}",
            data.molecules.len()
        )));
    }
    // frozen embeddings from a checkpoint when given, else random init
    let ps = match &cfg.checkpoint_path {
        Some(_) => load_checkpoint_validated(cfg)?.params,
        None => pipeline::init_model_params(&cfg.model, cfg.seed),
    };

    let mut per_view: BTreeMap<View, Vec<Vec<f64>>> = BTreeMap::new();
    for m in &data.molecules {
        let embeds = embed_molecule(&ps, &cfg.model, &cfg.views, &m.views)?;
        for (v, e) in embeds {
            per_view.entry(v).or_default().push(e);
        }
    }

    let mut out = String::new();
    // chirality probe needs a binary label column
    let chirality_labels: Option<Vec<f64>> = if data.n_tasks() >= 1 {
        let labels: Vec<f64> = data
            .molecules
            .iter()
            .map(|m| m.labels.first().copied().flatten().unwrap_or(f64::NAN))
            .collect();
        if labels.iter().all(|v| *v == 0.0 || *v == 1.0) {
            Some(labels)
        } else {
            None
        }
    } else {
        None
    };
    if let Some(labels) = chirality_labels {
        let ap = case_study_chirality(&per_view, &labels, cfg.seed);
        out.push_str(&case_study_table("chirality probe (average precision, higher is better)", &ap, &CHIRALITY_AP_REFERENCE));
        out.push('\n');
    } else {
        out.push_str("chirality probe skipped: no binary label column\n\n");
    }

    let ring_counts: Vec<f64> = data
        .molecules
        .iter()
        .map(|m| m.graph.count_aromatic_rings() as f64)
        .collect();
    let (maes, baseline) = case_study_rings(&per_view, &ring_counts, cfg.seed);
    out.push_str(&case_study_table("aromatic ring count probe (MAE, lower is better)", &maes, &RING_MAE_REFERENCE));
    out.push_str(&format!("constant-mean baseline MAE: {baseline:.4}\n"));
    out.push_str("reference targets are documentation values from the corpus-scale study, not pass thresholds\n");

    write_text(&dir.join("case_study.txt"), &out)?;
    Ok(out)
}

/// Export full-dataset fusion weights from a checkpoint as CSV (and an
/// optional SVG bar chart).
pub fn cmd_export_attention(cfg: &RunConfig, plot: Option<&Path>) -> Result<String, CliError> {
    let ck = load_checkpoint_validated(cfg)?;
    for name in ["fusion.q", "fusion.w", "fusion.b"] {
        if !ck.params.contains(name) {
            return Err(CliError::Usage(format!("checkpoint is missing fusion parameters ({name})")));
        }
    }
    let dir = out_dir(cfg)?;
    write_resolved(cfg, &dir)?;
    let vocab = resolve_vocab(cfg)?;
    let data = load_dataset(cfg, &vocab)?;
    if data.molecules.is_empty() {
        return Err(CliError::Usage("dataset is empty".into()));
    }

    let mut embeddings = Vec::with_capacity(data.molecules.len());
    for m in &data.molecules {
        embeddings.push(embed_molecule(&ck.params, &cfg.model, &cfg.views, &m.views)?);
    }
    let alpha = eval_alpha(&ck.params, &cfg.views, &embeddings)?;
    let csv = alpha_csv(&cfg.views, &alpha);
    write_text(&dir.join("alpha.csv"), &csv)?;
    if let Some(plot_path) = plot {
        write_text(plot_path, &alpha_svg(&cfg.views, &alpha))?;
    }
    Ok(csv)
}

/// Train the tokenizer on the dataset's SMILES column and write it as JSON.
pub fn cmd_tokenize_train(cfg: &RunConfig, out: Option<&Path>) -> Result<String, CliError> {
    let csv = cfg
        .dataset_csv
        .as_ref()
        .ok_or_else(|| CliError::Usage("dataset.csv is required for tokenize-train".into()))?;
    let corpus = read_smiles_column(Path::new(csv))?;
    let vocab = BpeVocab::train(&corpus, cfg.model.vocab_size.saturating_sub(4))?;
    let dir = out_dir(cfg)?;
    let path = out.map_or_else(|| dir.join("vocab.json"), Path::to_path_buf);
    write_text(&path, &vocab.to_json())?;
    Ok(format!(
        "trained tokenizer on {} strings: alphabet {}, merges {}, total ids {}; wrote {}",
        corpus.len(),
        vocab.alphabet_len(),
        vocab.merges().len(),
        vocab.n_ids(),
        path.display()
    ))
}

/// Minimal SVG bar chart of the per-view weights.
fn alpha_svg(views: &[View], alpha: &[f64]) -> String {
    let width = 320;
    let height = 200;
    let bar_w = 48;
    let gap = 24;
    let max = alpha.iter().copied().fold(0.0f64, f64::max).max(1e-9);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    );
    for (i, (v, &a)) in views.iter().zip(alpha).enumerate() {
        let h = (a / max * 140.0).round() as i64;
        let x = 30 + i as i64 * (bar_w + gap);
        let y = 160 - h;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"{bar_w}\" height=\"{h}\" fill=\"#4878a8\"/>\n\
             <text x=\"{}\" y=\"178\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
            x + bar_w / 2,
            v.label(),
            x + bar_w / 2,
            y - 4,
            a
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
