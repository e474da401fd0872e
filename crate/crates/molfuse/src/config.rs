//! Run configuration: a flat `key = value` text format with dotted section
//! prefixes. Unknown keys are hard errors, and validation reports every
//! problem at once rather than stopping at the first.

use crate::encoders::{DropoutRates, FpEncoderKind, ModelConfig, View};
use crate::fusion::FusionMode;
use crate::nn::LrTable;
use crate::util::fnv1a64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Classify,
    Regress,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "classify" => Some(TaskKind::Classify),
            "regress" => Some(TaskKind::Regress),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::Classify => "classify",
            TaskKind::Regress => "regress",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMethod {
    Scaffold,
    Random,
}

impl SplitMethod {
    pub fn parse(s: &str) -> Option<SplitMethod> {
        match s {
            "scaffold" => Some(SplitMethod::Scaffold),
            "random" => Some(SplitMethod::Random),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SplitMethod::Scaffold => "scaffold",
            SplitMethod::Random => "random",
        }
    }
}

#[derive(Debug, Error)]
#[error("configuration errors:\n{}", .0.join("\n"))]
pub struct ConfigError(pub Vec<String>);

/// Everything a run needs. Paths are optional because different commands
/// require different subsets; each command validates what it uses.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset_name: String,
    pub dataset_csv: Option<String>,
    pub task: TaskKind,
    pub label_columns: Vec<String>,
    pub conformer_dir: Option<String>,

    pub views: Vec<View>,
    pub fusion_mode: FusionMode,
    pub model: ModelConfig,
    pub tau: f64,

    pub batch_size: usize,
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub mlm_epochs: usize,
    pub mlm_batch_size: usize,
    pub mlm_lr: f64,
    pub mask_prob: f64,
    pub seed: u64,
    pub seeds: Vec<u64>,

    pub lr_gin: f64,
    pub lr_schnet: f64,
    pub lr_fp: f64,
    pub lr_sm: f64,
    pub lr_fusion: f64,
    pub lr_critic: f64,
    pub lr_head: f64,

    pub split_method: SplitMethod,
    pub split_train: f64,
    pub split_valid: f64,

    pub max_failure_pct: f64,
    pub out_dir: String,
    pub cache_dir: Option<String>,
    pub vocab_path: Option<String>,
    pub checkpoint_path: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_name: "dataset".into(),
            dataset_csv: None,
            task: TaskKind::Classify,
            label_columns: Vec::new(),
            conformer_dir: None,
            views: View::ALL.to_vec(),
            fusion_mode: FusionMode::Attention,
            model: ModelConfig::default(),
            tau: 0.1,
            batch_size: 256,
            epochs: 100,
            finetune_epochs: 30,
            mlm_epochs: 4,
            mlm_batch_size: 32,
            mlm_lr: 1e-3,
            mask_prob: 0.15,
            seed: 0,
            seeds: vec![0, 1, 2],
            lr_gin: 1e-3,
            lr_schnet: 1e-3,
            lr_fp: 1e-3,
            lr_sm: 1e-3,
            lr_fusion: 1e-3,
            lr_critic: 1e-3,
            lr_head: 1e-3,
            split_method: SplitMethod::Scaffold,
            split_train: 0.8,
            split_valid: 0.1,
            max_failure_pct: 10.0,
            out_dir: "runs/out".into(),
            cache_dir: None,
            vocab_path: None,
            checkpoint_path: None,
        }
    }
}

impl RunConfig {
    /// Parse the flat key-value text into a config, starting from defaults.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut errors = Vec::new();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected 'key = value', got {:?}", lineno + 1, line));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
                errors.push(format!("line {}: key {key} already set on line {prev}", lineno + 1));
                continue;
            }
            if let Err(e) = cfg.apply(key, value) {
                errors.push(format!("line {}: {e}", lineno + 1));
            }
        }
        cfg.validate(&mut errors);
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError(errors))
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        match key {
            "dataset.name" => self.dataset_name = value.to_string(),
            "dataset.csv" => self.dataset_csv = Some(value.to_string()),
            "dataset.task" => {
                self.task = TaskKind::parse(value)
                    .ok_or_else(|| format!("dataset.task must be classify or regress, got {value:?}"))?;
            }
            "dataset.labels" => {
                self.label_columns = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect();
            }
            "dataset.conformer_dir" => self.conformer_dir = Some(value.to_string()),
            "views" => {
                let mut views = Vec::new();
                for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    views.push(
                        View::parse(part).ok_or_else(|| format!("unknown view {part:?} (use 2d,3d,fp,sm)"))?,
                    );
                }
                if views.is_empty() {
                    return Err("views must name at least one view".into());
                }
                views.sort();
                views.dedup();
                self.views = views;
            }
            "fusion.mode" => {
                self.fusion_mode = FusionMode::parse(value)
                    .ok_or_else(|| format!("unknown fusion mode {value:?}"))?;
            }
            "objective.tau" => self.tau = num(key, value)?,
            "model.dim" => self.model.dim = num(key, value)?,
            "model.fp_bits" => self.model.fp_bits = num(key, value)?,
            "model.fp_radius" => self.model.fp_radius = num(key, value)?,
            "model.fp_embed_dim" => self.model.fp_embed_dim = num(key, value)?,
            "model.fp_heads" => self.model.fp_heads = num(key, value)?,
            "model.fp_encoder" => {
                self.model.fp_encoder = match value {
                    "attention" => FpEncoderKind::Attention,
                    "mlp" => FpEncoderKind::Mlp,
                    _ => return Err(format!("model.fp_encoder must be attention or mlp, got {value:?}")),
                };
            }
            "model.vocab_size" => self.model.vocab_size = num(key, value)?,
            "model.max_seq_len" => self.model.max_seq_len = num(key, value)?,
            "model.gin_layers" => self.model.gin_layers = num(key, value)?,
            "model.schnet_layers" => self.model.schnet_layers = num(key, value)?,
            "model.schnet_hidden" => self.model.schnet_hidden = num(key, value)?,
            "model.rbf_count" => self.model.rbf_count = num(key, value)?,
            "model.rbf_max" => self.model.rbf_max = num(key, value)?,
            "model.rbf_gamma" => self.model.rbf_gamma = num(key, value)?,
            "model.schnet_cutoff" => {
                self.model.schnet_cutoff = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(num(key, value)?)
                };
            }
            "model.sm_layers" => self.model.sm_layers = num(key, value)?,
            "model.sm_heads" => self.model.sm_heads = num(key, value)?,
            "model.sm_hidden" => self.model.sm_hidden = num(key, value)?,
            "model.sm_ffn_hidden" => self.model.sm_ffn_hidden = num(key, value)?,
            "model.sm_frozen" => self.model.sm_frozen = num(key, value)?,
            "model.critic_hidden" => self.model.critic_hidden = num(key, value)?,
            "encoder.gin.lr" => self.lr_gin = num(key, value)?,
            "encoder.schnet.lr" => self.lr_schnet = num(key, value)?,
            "encoder.fp.lr" => self.lr_fp = num(key, value)?,
            "encoder.sm.lr" => self.lr_sm = num(key, value)?,
            "encoder.gin.dropout" => self.model.dropout.gin = num(key, value)?,
            "encoder.schnet.dropout" => self.model.dropout.schnet = num(key, value)?,
            "encoder.fp.dropout" => self.model.dropout.fp = num(key, value)?,
            "encoder.sm.dropout" => self.model.dropout.sm = num(key, value)?,
            "fusion.lr" => self.lr_fusion = num(key, value)?,
            "objective.lr" => self.lr_critic = num(key, value)?,
            "head.lr" => self.lr_head = num(key, value)?,
            "train.batch_size" => self.batch_size = num(key, value)?,
            "train.epochs" => self.epochs = num(key, value)?,
            "train.finetune_epochs" => self.finetune_epochs = num(key, value)?,
            "train.mlm_epochs" => self.mlm_epochs = num(key, value)?,
            "train.mlm_batch_size" => self.mlm_batch_size = num(key, value)?,
            "train.mlm_lr" => self.mlm_lr = num(key, value)?,
            "train.mask_prob" => self.mask_prob = num(key, value)?,
            "train.seed" => self.seed = num(key, value)?,
            "train.seeds" => {
                let mut seeds = Vec::new();
                for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    seeds.push(num::<u64>(key, part)?);
                }
                if seeds.is_empty() {
                    return Err("train.seeds must list at least one seed".into());
                }
                self.seeds = seeds;
            }
            "split.method" => {
                self.split_method = SplitMethod::parse(value)
                    .ok_or_else(|| format!("split.method must be scaffold or random, got {value:?}"))?;
            }
            "split.train" => self.split_train = num(key, value)?,
            "split.valid" => self.split_valid = num(key, value)?,
            "featurize.max_failure_pct" => self.max_failure_pct = num(key, value)?,
            "paths.out_dir" => self.out_dir = value.to_string(),
            "paths.cache_dir" => self.cache_dir = Some(value.to_string()),
            "paths.vocab" => self.vocab_path = Some(value.to_string()),
            "paths.checkpoint" => self.checkpoint_path = Some(value.to_string()),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    fn validate(&self, errors: &mut Vec<String>) {
        if let Err(e) = self.model.validate() {
            errors.push(e);
        }
        if self.tau <= 0.0 {
            errors.push(format!("objective.tau must be positive, got {}", self.tau));
        }
        for (name, lr) in [
            ("encoder.gin.lr", self.lr_gin),
            ("encoder.schnet.lr", self.lr_schnet),
            ("encoder.fp.lr", self.lr_fp),
            ("encoder.sm.lr", self.lr_sm),
            ("fusion.lr", self.lr_fusion),
            ("objective.lr", self.lr_critic),
            ("head.lr", self.lr_head),
            ("train.mlm_lr", self.mlm_lr),
        ] {
            if lr <= 0.0 {
                errors.push(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.batch_size == 0 {
            errors.push("train.batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.mask_prob) {
            errors.push(format!("train.mask_prob must be in [0,1], got {}", self.mask_prob));
        }
        if self.split_train <= 0.0 || self.split_valid < 0.0 || self.split_train + self.split_valid >= 1.0 {
            errors.push(format!(
                "split ratios must satisfy 0 < train, 0 <= valid, train+valid < 1 (got {} and {})",
                self.split_train, self.split_valid
            ));
        }
        if !(0.0..=100.0).contains(&self.max_failure_pct) {
            errors.push(format!(
                "featurize.max_failure_pct must be in [0,100], got {}",
                self.max_failure_pct
            ));
        }
    }

    /// Hash of every architecture-relevant field; checkpoints refuse to load
    /// under a different hash.
    pub fn architecture_hash(&self) -> u64 {
        let json = serde_json::to_string(&self.model).expect("model config serializes");
        fnv1a64(json.as_bytes())
    }

    /// Hash of the fields that determine featurization output; cache entries
    /// with a different hash are recomputed.
    pub fn featurizer_hash(&self, vocab_json: &str) -> u64 {
        let tag = format!(
            "fp_bits={};fp_radius={};vocab={:016x}",
            self.model.fp_bits,
            self.model.fp_radius,
            fnv1a64(vocab_json.as_bytes())
        );
        fnv1a64(tag.as_bytes())
    }

    pub fn lr_table(&self) -> LrTable {
        LrTable::uniform(self.lr_head)
            .with("gin", self.lr_gin)
            .with("schnet", self.lr_schnet)
            .with("fp", self.lr_fp)
            .with("sm", self.lr_sm)
            .with("sm_head", self.lr_sm)
            .with("fusion", self.lr_fusion)
            .with("critic", self.lr_critic)
            .with("head", self.lr_head)
    }

    pub fn dropout(&self) -> DropoutRates {
        self.model.dropout
    }

    /// Render every key with its resolved value, sorted, for the run
    /// directory. Parsing the output reproduces this config exactly.
    pub fn resolved_text(&self) -> String {
        let mut pairs: Vec<(String, String)> = vec![
            ("dataset.name".into(), self.dataset_name.clone()),
            ("dataset.task".into(), self.task.label().into()),
            (
                "dataset.labels".into(),
                self.label_columns.join(","),
            ),
            (
                "views".into(),
                self.views.iter().map(|v| v.label()).collect::<Vec<_>>().join(","),
            ),
            ("fusion.mode".into(), self.fusion_mode.label().into()),
            ("objective.tau".into(), self.tau.to_string()),
            ("model.dim".into(), self.model.dim.to_string()),
            ("model.fp_bits".into(), self.model.fp_bits.to_string()),
            ("model.fp_radius".into(), self.model.fp_radius.to_string()),
            ("model.fp_embed_dim".into(), self.model.fp_embed_dim.to_string()),
            ("model.fp_heads".into(), self.model.fp_heads.to_string()),
            (
                "model.fp_encoder".into(),
                match self.model.fp_encoder {
                    FpEncoderKind::Attention => "attention".into(),
                    FpEncoderKind::Mlp => "mlp".into(),
                },
            ),
            ("model.vocab_size".into(), self.model.vocab_size.to_string()),
            ("model.max_seq_len".into(), self.model.max_seq_len.to_string()),
            ("model.gin_layers".into(), self.model.gin_layers.to_string()),
            ("model.schnet_layers".into(), self.model.schnet_layers.to_string()),
            ("model.schnet_hidden".into(), self.model.schnet_hidden.to_string()),
            ("model.rbf_count".into(), self.model.rbf_count.to_string()),
            ("model.rbf_max".into(), self.model.rbf_max.to_string()),
            ("model.rbf_gamma".into(), self.model.rbf_gamma.to_string()),
            (
                "model.schnet_cutoff".into(),
                self.model.schnet_cutoff.map_or("none".into(), |c| c.to_string()),
            ),
            ("model.sm_layers".into(), self.model.sm_layers.to_string()),
            ("model.sm_heads".into(), self.model.sm_heads.to_string()),
            ("model.sm_hidden".into(), self.model.sm_hidden.to_string()),
            ("model.sm_ffn_hidden".into(), self.model.sm_ffn_hidden.to_string()),
            ("model.sm_frozen".into(), self.model.sm_frozen.to_string()),
            ("model.critic_hidden".into(), self.model.critic_hidden.to_string()),
            ("encoder.gin.lr".into(), self.lr_gin.to_string()),
            ("encoder.schnet.lr".into(), self.lr_schnet.to_string()),
            ("encoder.fp.lr".into(), self.lr_fp.to_string()),
            ("encoder.sm.lr".into(), self.lr_sm.to_string()),
            ("encoder.gin.dropout".into(), self.model.dropout.gin.to_string()),
            ("encoder.schnet.dropout".into(), self.model.dropout.schnet.to_string()),
            ("encoder.fp.dropout".into(), self.model.dropout.fp.to_string()),
            ("encoder.sm.dropout".into(), self.model.dropout.sm.to_string()),
            ("fusion.lr".into(), self.lr_fusion.to_string()),
            ("objective.lr".into(), self.lr_critic.to_string()),
            ("head.lr".into(), self.lr_head.to_string()),
            ("train.batch_size".into(), self.batch_size.to_string()),
            ("train.epochs".into(), self.epochs.to_string()),
            ("train.finetune_epochs".into(), self.finetune_epochs.to_string()),
            ("train.mlm_epochs".into(), self.mlm_epochs.to_string()),
            ("train.mlm_batch_size".into(), self.mlm_batch_size.to_string()),
            ("train.mlm_lr".into(), self.mlm_lr.to_string()),
            ("train.mask_prob".into(), self.mask_prob.to_string()),
            ("train.seed".into(), self.seed.to_string()),
            (
                "train.seeds".into(),
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("split.method".into(), self.split_method.label().into()),
            ("split.train".into(), self.split_train.to_string()),
            ("split.valid".into(), self.split_valid.to_string()),
            ("featurize.max_failure_pct".into(), self.max_failure_pct.to_string()),
            ("paths.out_dir".into(), self.out_dir.clone()),
        ];
        if let Some(v) = &self.dataset_csv {
            pairs.push(("dataset.csv".into(), v.clone()));
        }
        if let Some(v) = &self.conformer_dir {
            pairs.push(("dataset.conformer_dir".into(), v.clone()));
        }
        if let Some(v) = &self.cache_dir {
            pairs.push(("paths.cache_dir".into(), v.clone()));
        }
        if let Some(v) = &self.vocab_path {
            pairs.push(("paths.vocab".into(), v.clone()));
        }
        if let Some(v) = &self.checkpoint_path {
            pairs.push(("paths.checkpoint".into(), v.clone()));
        }
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
