//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "CANT"  u32 version  u32 meta_len  meta (JSON)  u32 entry_count
//! entry:  u32 name_len  name (UTF-8)  u8 dtype  u32 n c h w  raw values
//! ```
//!
//! `meta` echoes the model config and, for trained models, the task.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Canet, Model, ModelConfig};
use crate::nn::{ParamStore, Parameter};
use crate::tensor::{DType, Real, Tensor};
use crate::trainer::Task;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CANT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {offset}: {needed} more bytes expected")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
    #[error("unknown dtype tag {0}")]
    BadDtype(u8),
    #[error("malformed checkpoint metadata: {0}")]
    BadMeta(String),
    #[error("parameter {name}: expected {expected}, found {found}")]
    ShapeMismatch {
        name: String,
        expected: String,
        found: String,
    },
    #[error("parameter {0} missing from checkpoint")]
    Missing(String),
    #[error("unexpected parameter {0} in checkpoint")]
    Unexpected(String),
    #[error("checkpoint was saved for a different model config")]
    ConfigMismatch,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    #[serde(default)]
    pub task: Option<Task>,
}

/// A decoded checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub meta: CheckpointMeta,
    pub model: Model<T>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint<T: Real>(model: &Model<T>, task: Option<&Task>) -> Vec<u8> {
    let meta = CheckpointMeta {
        model: model.config().clone(),
        task: task.cloned(),
    };
    let meta = serde_json::to_vec(&meta).expect("plain config");
    let mut out = Vec::with_capacity(64 + meta.len() + model.params.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, meta.len() as u32);
    out.extend_from_slice(&meta);
    put_u32(&mut out, model.params.len() as u32);
    for p in model.params.iter() {
        put_u32(&mut out, p.name.len() as u32);
        out.extend_from_slice(p.name.as_bytes());
        out.push(T::DTYPE.tag());
        for d in p.value.shape().dims() {
            put_u32(&mut out, d as u32);
        }
        for &v in p.value.data() {
            v.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let rest = self.bytes.len() - self.pos;
        if rest < n {
            return Err(CheckpointError::Truncated {
                offset: self.bytes.len(),
                needed: n - rest,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses a checkpoint and rebuilds the model its metadata describes.
/// Values stored in another precision are converted.
pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let meta_len = r.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| CheckpointError::BadMeta(e.to_string()))?;
    let net = Canet::new(&meta.model).map_err(|e| CheckpointError::BadMeta(e.to_string()))?;

    let count = r.u32()? as usize;
    let mut entries: Vec<Option<Tensor<T>>> = vec![None; net.layout().len()];
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|e| CheckpointError::BadMeta(e.to_string()))?;
        let tag = r.take(1)?[0];
        let dtype = DType::from_tag(tag).ok_or(CheckpointError::BadDtype(tag))?;
        let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?].map(|d| d as usize);
        let len = dims
            .iter()
            .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        let raw = r.take(len)?;
        let values: Vec<T> = match dtype {
            DType::F32 => raw.chunks_exact(4).map(|b| T::lit(f32::read_le(b) as f64)).collect(),
            DType::F64 => raw.chunks_exact(8).map(|b| T::lit(f64::read_le(b))).collect(),
        };

        let Some(idx) = net.layout().specs().iter().position(|s| s.name == name) else {
            return Err(CheckpointError::Unexpected(name));
        };
        let expected = net.layout().specs()[idx].shape;
        if expected.dims() != dims {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: expected.to_string(),
                found: format!("{}x{}x{}x{}", dims[0], dims[1], dims[2], dims[3]),
            });
        }
        if entries[idx].is_some() {
            return Err(CheckpointError::Unexpected(format!("{name} (duplicate)")));
        }
        entries[idx] = Some(Tensor::from_vec(expected, values).expect("length checked"));
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }

    let params = net
        .layout()
        .specs()
        .iter()
        .zip(entries)
        .map(|(spec, t)| {
            t.map(|t| Parameter::new(spec.name.clone(), t))
                .ok_or_else(|| CheckpointError::Missing(spec.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Checkpoint {
        meta,
        model: Model {
            net,
            params: ParamStore::from_parameters(params),
        },
    })
}

pub fn save_checkpoint<T: Real>(
    model: &Model<T>,
    task: Option<&Task>,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model, task)).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<T>, CheckpointError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes)
}

impl<T: Real> Checkpoint<T> {
    /// Fails unless the stored config equals `expected`.
    pub fn expect_config(self, expected: &ModelConfig) -> Result<Self, CheckpointError> {
        if &self.meta.model != expected {
            return Err(CheckpointError::ConfigMismatch);
        }
        Ok(self)
    }
}
