//! Dataset ingestion: a CSV manifest (`smiles` column plus label columns) and
//! an optional directory of per-row XYZ conformer files.
//!
//! Unparseable or unfeaturizable rows are skipped with a recorded reason,
//! never silently. Conformer files are looked up as `<dir>/<row>.xyz`, where
//! `row` is the 0-based data-row index; multi-frame files supply several
//! conformers for training-time sampling.

use crate::chem::{canonical_key, murcko_scaffold, parse_smiles, skeletal_key, MolGraph};
use crate::config::{RunConfig, TaskKind};
use crate::encoders::View;
use crate::featurize::{build_views, load_conformers, BpeVocab, MolViews};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("csv error in {path}: {msg}")]
    Csv { path: String, msg: String },
    #[error("column {0:?} missing from csv header")]
    MissingColumn(String),
    #[error("label {column:?} row {row}: {msg}")]
    BadLabel { column: String, row: usize, msg: String },
    #[error("{failed} of {total} rows failed to featurize ({pct:.1}% > threshold {threshold}%)")]
    TooManyFailures { failed: usize, total: usize, pct: f64, threshold: f64 },
}

/// One usable molecule with its views, conformers, and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    /// 0-based data-row index in the source CSV.
    pub row: usize,
    pub smiles: String,
    pub graph: MolGraph,
    pub views: MolViews,
    /// All supplied conformers; `views.positions` holds the first.
    pub conformers: Vec<Vec<[f64; 3]>>,
    pub labels: Vec<Option<f64>>,
    pub key: String,
    pub scaffold_key: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub task: TaskKind,
    pub label_names: Vec<String>,
    pub molecules: Vec<Molecule>,
    /// (row, reason) for every skipped input row.
    pub skipped: Vec<(usize, String)>,
}

impl Dataset {
    pub fn n_tasks(&self) -> usize {
        self.label_names.len()
    }
}

/// Group key for scaffold splitting: skeletal key of the pruned framework,
/// with the empty scaffold collapsing every acyclic molecule into one group.
pub fn scaffold_group_key(graph: &MolGraph) -> String {
    let scaffold = murcko_scaffold(graph);
    if scaffold.is_empty() {
        return String::new();
    }
    skeletal_key(&graph.induced_subgraph(&scaffold.atom_indices))
}

/// Parse, featurize, and label one SMILES row outside any CSV context.
pub fn featurize_molecule(
    row: usize,
    smiles: &str,
    conformers: Vec<Vec<[f64; 3]>>,
    labels: Vec<Option<f64>>,
    vocab: &BpeVocab,
    fp_bits: usize,
    fp_radius: u32,
) -> Result<Molecule, String> {
    let graph = parse_smiles(smiles).map_err(|e| e.to_string())?;
    let views = build_views(&graph, conformers.first().map(Vec::as_slice), vocab, fp_bits, fp_radius)
        .map_err(|e| e.to_string())?;
    let key = canonical_key(&graph);
    let scaffold_key = scaffold_group_key(&graph);
    Ok(Molecule { row, smiles: smiles.to_string(), graph, views, conformers, labels, key, scaffold_key })
}

/// Load the dataset named by the config. Requires `dataset.csv`.
pub fn load_dataset(cfg: &RunConfig, vocab: &BpeVocab) -> Result<Dataset, DataError> {
    let csv_path = cfg
        .dataset_csv
        .as_ref()
        .ok_or_else(|| DataError::MissingColumn("dataset.csv not configured".into()))?;
    let rows = read_csv_rows(Path::new(csv_path))?;
    let header = rows.first().ok_or_else(|| DataError::Csv {
        path: csv_path.clone(),
        msg: "empty file (no header)".into(),
    })?;

    let smiles_col = header
        .iter()
        .position(|h| h == "smiles")
        .ok_or_else(|| DataError::MissingColumn("smiles".into()))?;
    let label_names: Vec<String> = if cfg.label_columns.is_empty() {
        header.iter().filter(|h| h.as_str() != "smiles").cloned().collect()
    } else {
        cfg.label_columns.clone()
    };
    let mut label_cols = Vec::with_capacity(label_names.len());
    for name in &label_names {
        label_cols.push(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.clone()))?,
        );
    }

    let need_3d = cfg.views.contains(&View::ThreeD);
    let mut molecules = Vec::new();
    let mut skipped = Vec::new();
    for (row, record) in rows[1..].iter().enumerate() {
        let smiles = record.get(smiles_col).map(String::as_str).unwrap_or("");
        let mut labels = Vec::with_capacity(label_cols.len());
        let mut label_err = None;
        for (&col, name) in label_cols.iter().zip(&label_names) {
            let cell = record.get(col).map(String::as_str).unwrap_or("").trim();
            if cell.is_empty() {
                labels.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    if cfg.task == TaskKind::Classify && v != 0.0 && v != 1.0 {
                        label_err = Some(format!("label {name:?} must be 0/1/missing, got {cell:?}"));
                        break;
                    }
                    labels.push(Some(v));
                }
                _ => {
                    label_err = Some(format!("label {name:?} is not numeric: {cell:?}"));
                    break;
                }
            }
        }
        if let Some(msg) = label_err {
            skipped.push((row, msg));
            continue;
        }

        let conformers = match &cfg.conformer_dir {
            Some(dir) => match load_row_conformers(Path::new(dir), row) {
                Ok(c) => c,
                Err(msg) => {
                    if need_3d {
                        skipped.push((row, msg));
                        continue;
                    }
                    Vec::new()
                }
            },
            None => Vec::new(),
        };
        if need_3d && conformers.is_empty() {
            skipped.push((row, "no conformers available for the 3d view".into()));
            continue;
        }

        match featurize_molecule(
            row,
            smiles,
            conformers,
            labels,
            vocab,
            cfg.model.fp_bits,
            cfg.model.fp_radius,
        ) {
            Ok(m) => molecules.push(m),
            Err(msg) => skipped.push((row, msg)),
        }
    }

    let total = molecules.len() + skipped.len();
    if total > 0 {
        let pct = 100.0 * skipped.len() as f64 / total as f64;
        if pct > cfg.max_failure_pct {
            return Err(DataError::TooManyFailures {
                failed: skipped.len(),
                total,
                pct,
                threshold: cfg.max_failure_pct,
            });
        }
    }

    Ok(Dataset {
        name: cfg.dataset_name.clone(),
        task: cfg.task,
        label_names,
        molecules,
        skipped,
    })
}

fn load_row_conformers(dir: &Path, row: usize) -> Result<Vec<Vec<[f64; 3]>>, String> {
    let path: PathBuf = dir.join(format!("{row}.xyz"));
    if !path.exists() {
        return Err(format!("conformer file {} not found", path.display()));
    }
    let frames = load_conformers(&path).map_err(|e| e.to_string())?;
    Ok(frames.into_iter().map(|f| f.coords).collect())
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| DataError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// SMILES corpus of a CSV (for tokenizer training): the `smiles` column only.
pub fn read_smiles_column(path: &Path) -> Result<Vec<String>, DataError> {
    let rows = read_csv_rows(path)?;
    let header = rows.first().ok_or_else(|| DataError::Csv {
        path: path.display().to_string(),
        msg: "empty file (no header)".into(),
    })?;
    let col = header
        .iter()
        .position(|h| h == "smiles")
        .ok_or_else(|| DataError::MissingColumn("smiles".into()))?;
    Ok(rows[1..]
        .iter()
        .filter_map(|r| r.get(col))
        .filter(|s| !s.is_empty())
        .cloned()
        .collect())
}
