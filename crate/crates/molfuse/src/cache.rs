//! Featurization cache: one append-friendly file per dataset.
//!
//! Each line is `canonical_key <TAB> featurizer-hash-hex <TAB> json`, where
//! the JSON holds the views plus all conformers. Later lines win, so appends
//! never need to rewrite the file. Entries whose hash differs from the
//! current featurizer configuration are ignored and recomputed.

use crate::dataset::Molecule;
use crate::featurize::MolViews;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io error at {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("cache audit failed for key {key}: cached views differ from recomputed views")]
    AuditMismatch { key: String },
}

/// What gets memoized per molecule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedViews {
    pub views: MolViews,
    pub conformers: Vec<Vec<[f64; 3]>>,
}

impl CachedViews {
    pub fn of(m: &Molecule) -> Self {
        CachedViews { views: m.views.clone(), conformers: m.conformers.clone() }
    }
}

/// Parse cache text; malformed or stale lines are skipped and counted rather
/// than failing the load.
pub fn parse_cache(text: &str, expected_hash: u64) -> (BTreeMap<String, CachedViews>, usize) {
    let mut map = BTreeMap::new();
    let mut ignored = 0;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(key), Some(hash), Some(json)) = (parts.next(), parts.next(), parts.next()) else {
            ignored += 1;
            continue;
        };
        let Ok(hash) = u64::from_str_radix(hash, 16) else {
            ignored += 1;
            continue;
        };
        if hash != expected_hash {
            ignored += 1;
            continue;
        }
        match serde_json::from_str::<CachedViews>(json) {
            Ok(v) => {
                map.insert(key.to_string(), v);
            }
            Err(_) => ignored += 1,
        }
    }
    (map, ignored)
}

pub fn load(path: &Path, expected_hash: u64) -> Result<(BTreeMap<String, CachedViews>, usize), CacheError> {
    if !path.exists() {
        return Ok((BTreeMap::new(), 0));
    }
    let file = std::fs::File::open(path)
        .map_err(|e| CacheError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| CacheError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        text.push_str(&line);
        text.push('\n');
    }
    Ok(parse_cache(&text, expected_hash))
}

/// Append entries; the single-writer discipline is the caller's.
pub fn append(path: &Path, hash: u64, entries: &[(String, CachedViews)]) -> Result<(), CacheError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CacheError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    }
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CacheError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    for (key, views) in entries {
        let json = serde_json::to_string(views).expect("cached views serialize");
        writeln!(f, "{key}\t{hash:016x}\t{json}")
            .map_err(|e| CacheError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    }
    Ok(())
}

/// Spot-check up to `n` cached entries against freshly computed views; a
/// mismatch means the cache is stale or corrupted.
pub fn audit(
    cached: &BTreeMap<String, CachedViews>,
    fresh: &[(String, CachedViews)],
    n: usize,
) -> Result<usize, CacheError> {
    let mut checked = 0;
    for (key, views) in fresh.iter().take(n) {
        if let Some(hit) = cached.get(key) {
            if hit != views {
                return Err(CacheError::AuditMismatch { key: key.clone() });
            }
            checked += 1;
        }
    }
    Ok(checked)
}
