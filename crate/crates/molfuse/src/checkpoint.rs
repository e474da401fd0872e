//! Versioned binary checkpoints: named parameter tensors, an architecture
//! hash, and the fusion state. Loading refuses mismatched magic, version,
//! hash, or tensor shapes.
//!
//! Layout (all integers little-endian):
//! `"MFCP" | version u32 | config_hash u64 | fusion mode u8 | frozen u8 |
//!  alpha count u8 | alpha f64… | param count u32 |
//!  { name len u16 | name utf8 | rows u32 | cols u32 | data f64… }…`

use crate::fusion::{FusionMode, FusionState};
use crate::nn::ParamSet;
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"MFCP";
const VERSION: u32 = 1;
// hard caps so a corrupted header cannot demand absurd allocations
const MAX_PARAMS: u32 = 1_000_000;
const MAX_NAME: u16 = 4096;
const MAX_ELEMS: u64 = 1 << 26;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint architecture hash {found:016x} does not match expected {expected:016x}")]
    ConfigMismatch { expected: u64, found: u64 },
    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug)]
pub struct Checkpoint {
    pub params: ParamSet,
    pub config_hash: u64,
    pub fusion: FusionState,
}

pub fn save(path: &Path, ps: &ParamSet, config_hash: u64, fusion: &FusionState) -> Result<(), CheckpointError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&config_hash.to_le_bytes());
    buf.push(match fusion.mode {
        FusionMode::Attention => 0,
        FusionMode::Max => 1,
        FusionMode::Mean => 2,
        FusionMode::Frozen => 3,
    });
    buf.push(u8::from(fusion.frozen));
    match &fusion.cached_alpha {
        Some(alpha) => {
            buf.push(alpha.len() as u8);
            for v in alpha {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => buf.push(0),
    }
    buf.extend_from_slice(&(ps.len() as u32).to_le_bytes());
    for (name, value) in ps.iter() {
        let bytes = name.as_bytes();
        buf.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(bytes);
        buf.extend_from_slice(&(value.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(value.ncols() as u32).to_le_bytes());
        for v in value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| CheckpointError::Io(e.to_string()))?;
    f.write_all(&buf).map_err(|e| CheckpointError::Io(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| CheckpointError::Io(e.to_string()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CheckpointError::Io(e.to_string()))?;
    decode(&bytes)
}

/// Decode a checkpoint from raw bytes. Every length is validated before use.
pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let config_hash = r.u64()?;
    let mode = match r.u8()? {
        0 => FusionMode::Attention,
        1 => FusionMode::Max,
        2 => FusionMode::Mean,
        3 => FusionMode::Frozen,
        m => return Err(CheckpointError::Malformed(format!("unknown fusion mode {m}"))),
    };
    let frozen = match r.u8()? {
        0 => false,
        1 => true,
        f => return Err(CheckpointError::Malformed(format!("bad frozen flag {f}"))),
    };
    let alpha_len = r.u8()? as usize;
    if alpha_len > 8 {
        return Err(CheckpointError::Malformed(format!("alpha length {alpha_len} too large")));
    }
    let cached_alpha = if alpha_len == 0 {
        None
    } else {
        let mut alpha = Vec::with_capacity(alpha_len);
        for _ in 0..alpha_len {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(CheckpointError::Malformed("non-finite alpha".into()));
            }
            alpha.push(v);
        }
        Some(alpha)
    };

    let count = r.u32()?;
    if count > MAX_PARAMS {
        return Err(CheckpointError::Malformed(format!("{count} parameters exceeds cap")));
    }
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = r.u16()?;
        if name_len == 0 || name_len > MAX_NAME {
            return Err(CheckpointError::Malformed(format!("bad name length {name_len}")));
        }
        let name_bytes = r.take(name_len as usize)?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| CheckpointError::Malformed("parameter name is not utf8".into()))?
            .to_string();
        if params.contains(&name) {
            return Err(CheckpointError::Malformed(format!("duplicate parameter {name}")));
        }
        let rows = r.u32()? as u64;
        let cols = r.u32()? as u64;
        let elems = rows.checked_mul(cols).filter(|&e| e > 0 && e <= MAX_ELEMS).ok_or_else(|| {
            CheckpointError::Malformed(format!("tensor {name} has invalid shape {rows}×{cols}"))
        })?;
        // bound the element count by the bytes actually remaining
        if r.remaining() < (elems as usize).saturating_mul(8) {
            return Err(CheckpointError::Malformed(format!("tensor {name} truncated")));
        }
        let mut data = Vec::with_capacity(elems as usize);
        for _ in 0..elems {
            data.push(r.f64()?);
        }
        let arr = Array2::from_shape_vec((rows as usize, cols as usize), data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        params.insert(name, arr);
    }
    if r.remaining() != 0 {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Checkpoint { params, config_hash, fusion: FusionState { mode, frozen, cached_alpha } })
}

/// Refuse checkpoints whose hash or tensor shapes disagree with a reference
/// parameter set built from the current configuration.
pub fn validate(ckpt: &Checkpoint, expected_hash: u64, reference: &ParamSet) -> Result<(), CheckpointError> {
    if ckpt.config_hash != expected_hash {
        return Err(CheckpointError::ConfigMismatch { expected: expected_hash, found: ckpt.config_hash });
    }
    for (name, value) in reference.iter() {
        match ckpt.params.try_get(name) {
            None => return Err(CheckpointError::Incompatible(format!("missing parameter {name}"))),
            Some(v) if v.dim() != value.dim() => {
                return Err(CheckpointError::Incompatible(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    v.dim(),
                    value.dim()
                )))
            }
            _ => {}
        }
    }
    for (name, _) in ckpt.params.iter() {
        if !reference.contains(name) && !name.starts_with("head.") {
            return Err(CheckpointError::Incompatible(format!("unexpected parameter {name}")));
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.at
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.remaining() < n {
            return Err(CheckpointError::Malformed("unexpected end of file".into()));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
