//! Supervised fine-tuning from a pretrained checkpoint.
//!
//! A linear head maps the fused embedding to one output per task; binary
//! cross-entropy with masked missing labels for classification, squared error
//! for regression. Encoders and the fusion network train jointly at their
//! per-group rates (fusion stays fixed in frozen mode). Model selection keeps
//! the epoch with the best validation metric; the whole protocol repeats over
//! the configured seeds and reports mean ± std per task.

use super::metrics::{mean_std, metric, MetricError, MetricKind};
use super::model::{batch_forward, predict, sigmoid};
use super::{DatasetSplit, PipelineError};
use crate::config::{RunConfig, TaskKind};
use crate::dataset::Dataset;
use crate::featurize::MolViews;
use crate::fusion::FusionMode;
use crate::nn::{glorot, linear, zeros_row, Adam, Bound, Graph, ParamSet};
use crate::util::seeded_rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use std::io::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub name: String,
    /// One value per seed; NaN when the subset had a single class.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub metric: MetricKind,
    pub seeds: Vec<u64>,
    pub tasks: Vec<TaskReport>,
    pub overall: TaskReport,
}

impl MetricsReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,metric,mean,std");
        for s in &self.seeds {
            out.push_str(&format!(",seed_{s}"));
        }
        out.push('\n');
        for task in self.tasks.iter().chain(std::iter::once(&self.overall)) {
            out.push_str(&format!("{},{},{},{}", task.name, self.metric.label(), task.mean, task.std));
            for v in &task.per_seed {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} over seeds {:?} ({} task{})\n",
            self.metric.label(),
            self.seeds,
            self.tasks.len(),
            if self.tasks.len() == 1 { "" } else { "s" }
        );
        for task in &self.tasks {
            out.push_str(&format!("  {:<24} {:.4} ± {:.4}\n", task.name, task.mean, task.std));
        }
        out.push_str(&format!("  {:<24} {:.4} ± {:.4}\n", "overall", self.overall.mean, self.overall.std));
        out
    }
}

pub struct FinetuneOutcome {
    pub report: MetricsReport,
    /// Fine-tuned parameters per seed (best validation epoch).
    pub per_seed_params: Vec<ParamSet>,
    /// Fusion weights used for the test evaluation, per seed.
    pub per_seed_alpha: Vec<Option<Vec<f64>>>,
}

fn params_with_fresh_head(base: &ParamSet, dim: usize, n_tasks: usize, seed: u64) -> ParamSet {
    let mut ps = ParamSet::new();
    for (name, value) in base.iter() {
        if !name.starts_with("head.") {
            ps.insert(name, value.clone());
        }
    }
    ps.insert("head.w", glorot(seed, "head.w", dim, n_tasks));
    ps.insert("head.b", zeros_row(n_tasks));
    ps
}

/// Valid/test evaluation: per-task metric values (NaN for undefined tasks)
/// and the fusion weights used.
#[allow(clippy::type_complexity)]
fn evaluate(
    cfg: &RunConfig,
    ps: &ParamSet,
    data: &Dataset,
    indices: &[usize],
    kind: MetricKind,
) -> Result<(Vec<f64>, Option<Vec<f64>>), PipelineError> {
    if indices.is_empty() {
        return Ok((vec![f64::NAN; data.n_tasks()], None));
    }
    let mols: Vec<&MolViews> = indices.iter().map(|&i| &data.molecules[i].views).collect();
    let pred = predict(ps, &cfg.model, &cfg.views, cfg.fusion_mode, &mols)?;
    let mut per_task = Vec::with_capacity(data.n_tasks());
    for t in 0..data.n_tasks() {
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        for (k, &i) in indices.iter().enumerate() {
            if let Some(y) = data.molecules[i].labels[t] {
                let raw = pred.logits[k][t];
                preds.push(if data.task == TaskKind::Classify { sigmoid(raw) } else { raw });
                targets.push(y);
            }
        }
        let value = match metric(&preds, &targets, kind) {
            Ok(v) => v,
            Err(MetricError::SingleClass(_)) | Err(MetricError::Empty) => f64::NAN,
            Err(e) => return Err(PipelineError::Metric(e)),
        };
        per_task.push(value);
    }
    Ok((per_task, pred.alpha))
}

fn nan_mean(values: &[f64]) -> f64 {
    let good: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if good.is_empty() {
        f64::NAN
    } else {
        good.iter().sum::<f64>() / good.len() as f64
    }
}

fn improves(candidate: f64, best: f64, kind: MetricKind) -> bool {
    if !candidate.is_finite() {
        return false;
    }
    if !best.is_finite() {
        return true;
    }
    if kind.higher_is_better() {
        candidate > best
    } else {
        candidate < best
    }
}

/// Fine-tune from `base` parameters over every configured seed.
///
/// `log` receives one CSV line per (seed, epoch): `epoch,loss,lr,wall_ms`.
pub fn finetune(
    cfg: &RunConfig,
    data: &Dataset,
    split: &DatasetSplit,
    base: &ParamSet,
    mut log: Option<&mut dyn Write>,
) -> Result<FinetuneOutcome, PipelineError> {
    if data.n_tasks() == 0 {
        return Err(PipelineError::InvalidConfig("dataset has no label columns".into()));
    }
    let kind = match data.task {
        TaskKind::Classify => MetricKind::RocAuc,
        TaskKind::Regress => MetricKind::Rmse,
    };
    let mut frozen: Vec<&str> = Vec::new();
    if cfg.model.sm_frozen {
        frozen.push("sm");
    }
    if cfg.fusion_mode == FusionMode::Frozen {
        frozen.push("fusion");
    }
    let lrs = cfg.lr_table();

    let mut per_task_per_seed: Vec<Vec<f64>> = vec![Vec::new(); data.n_tasks()];
    let mut per_seed_params = Vec::new();
    let mut per_seed_alpha = Vec::new();

    for &seed in &cfg.seeds {
        let mut ps = params_with_fresh_head(base, cfg.model.dim, data.n_tasks(), seed);
        let mut adam = Adam::new();
        let mut best: Option<(f64, ParamSet)> = None;

        for epoch in 0..cfg.finetune_epochs {
            let started = std::time::Instant::now();
            let mut order = split.train.clone();
            let mut rng = seeded_rng(seed, &format!("finetune.shuffle.{epoch}"));
            order.shuffle(&mut rng);

            let mut epoch_losses = Vec::new();
            for (batch_id, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let mols: Vec<MolViews> =
                    chunk.iter().map(|&i| data.molecules[i].views.clone()).collect();
                let mut g = Graph::new();
                let bound = Bound::new(&mut g, &ps, &frozen);
                let mut drop_rng = seeded_rng(seed, &format!("finetune.dropout.{epoch}.{batch_id}"));
                let out = batch_forward(
                    &mut g,
                    &bound,
                    &cfg.model,
                    &cfg.views,
                    &mols,
                    cfg.fusion_mode,
                    Some(&mut drop_rng),
                )?;
                let logits = linear(&mut g, out.fused, bound.var("head.w"), bound.var("head.b"));

                // masked task loss
                let b = chunk.len();
                let t = data.n_tasks();
                let mut y = Array2::zeros((b, t));
                let mut mask = Array2::zeros((b, t));
                let mut present = 0usize;
                for (k, &i) in chunk.iter().enumerate() {
                    for (tt, label) in data.molecules[i].labels.iter().enumerate() {
                        if let Some(v) = label {
                            y[[k, tt]] = *v;
                            mask[[k, tt]] = 1.0;
                            present += 1;
                        }
                    }
                }
                if present == 0 {
                    continue;
                }
                let yv = g.constant(y);
                let maskv = g.constant(mask);
                let elem = match data.task {
                    TaskKind::Classify => {
                        // ln(1+e^x) − x·y, the stable logit cross-entropy
                        let sp = g.softplus(logits);
                        let xy = g.mul_elem(logits, yv);
                        g.sub(sp, xy)
                    }
                    TaskKind::Regress => {
                        let diff = g.sub(logits, yv);
                        g.mul_elem(diff, diff)
                    }
                };
                let masked = g.mul_elem(elem, maskv);
                let total = g.sum_all(masked);
                let loss = g.scale(total, 1.0 / present as f64);
                let value = g.scalar_value(loss);
                if !value.is_finite() {
                    return Err(PipelineError::NanLoss { epoch, batch: batch_id, params_norm: ps.l2_norm() });
                }
                g.backward(loss);
                let grads = bound.gradients(&g, &ps);
                adam.step(&mut ps, &grads, &lrs);
                epoch_losses.push(value);
            }

            let (valid_metrics, _) = evaluate(cfg, &ps, data, &split.valid, kind)?;
            let score = nan_mean(&valid_metrics);
            if best.as_ref().is_none_or(|(b, _)| improves(score, *b, kind)) {
                best = Some((score, ps.clone()));
            }
            if let Some(log) = log.as_deref_mut() {
                let mean_loss = if epoch_losses.is_empty() {
                    0.0
                } else {
                    epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64
                };
                writeln!(log, "{epoch},{mean_loss},{},{}", cfg.lr_head, started.elapsed().as_millis())
                    .map_err(|e| PipelineError::InvalidConfig(format!("cannot write training log: {e}")))?;
            }
        }

        let chosen = best.map_or_else(|| ps.clone(), |(_, p)| p);
        let (test_metrics, alpha) = evaluate(cfg, &chosen, data, &split.test, kind)?;
        for (t, v) in test_metrics.into_iter().enumerate() {
            per_task_per_seed[t].push(v);
        }
        per_seed_params.push(chosen);
        per_seed_alpha.push(alpha);
    }

    let tasks: Vec<TaskReport> = data
        .label_names
        .iter()
        .zip(&per_task_per_seed)
        .map(|(name, values)| {
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let (mean, std) = if finite.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&finite) };
            TaskReport { name: name.clone(), per_seed: values.clone(), mean, std }
        })
        .collect();
    let per_seed_overall: Vec<f64> = (0..cfg.seeds.len())
        .map(|s| nan_mean(&per_task_per_seed.iter().map(|t| t[s]).collect::<Vec<_>>()))
        .collect();
    let finite: Vec<f64> = per_seed_overall.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, std) = if finite.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&finite) };
    let overall = TaskReport { name: "overall".into(), per_seed: per_seed_overall, mean, std };

    Ok(FinetuneOutcome {
        report: MetricsReport { metric: kind, seeds: cfg.seeds.clone(), tasks, overall },
        per_seed_params,
        per_seed_alpha,
    })
}
