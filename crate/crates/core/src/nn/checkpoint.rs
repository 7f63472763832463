//! Checkpoint container: `SMCK` magic, u32 version, u64 header length, a
//! JSON header (architecture plus tensor table), then little-endian f32
//! tensor data at the offsets listed in the header.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchConfig, ModelWeights, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the data section.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: ArchConfig,
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(w: &ModelWeights) -> Vec<u8> {
    let mut offset = 0;
    let tensors = w
        .tensor_specs()
        .into_iter()
        .map(|(name, shape)| {
            let e = TensorEntry {
                name,
                offset,
                shape,
            };
            offset += e.shape.iter().product::<usize>();
            e
        })
        .collect();
    let header = CheckpointHeader {
        arch: w.arch.clone(),
        dtype: "f32le".into(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + offset * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in w.all_tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelWeights> {
    let bad = |m: &str| Error::format("checkpoint", m);
    if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing SMCK magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
    let json = body.get(..hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(json).map_err(|e| bad(&format!("bad header: {e}")))?;
    if header.dtype != "f32le" {
        return Err(bad(&format!("unsupported dtype {}", header.dtype)));
    }
    let data = &body[hlen..];
    if data.len() % 4 != 0 {
        return Err(bad("data section is not a whole number of f32 values"));
    }
    let mut net = Network::<f32>::init(&header.arch, 0)?;
    let specs = net.tensor_specs();
    if specs.len() != header.tensors.len() {
        return Err(bad("tensor table does not match the architecture"));
    }
    for ((spec, entry), t) in specs.iter().zip(&header.tensors).zip(net.all_tensors_mut()) {
        if spec.0 != entry.name || spec.1 != entry.shape {
            return Err(bad(&format!("tensor `{}` does not match the architecture", entry.name)));
        }
        let start = entry.offset * 4;
        let raw = data
            .get(start..start + t.len() * 4)
            .ok_or_else(|| bad(&format!("tensor `{}` is truncated", entry.name)))?;
        for (v, c) in t.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(c.try_into().unwrap());
        }
    }
    Ok(net)
}

pub fn save_checkpoint(w: &ModelWeights, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(w)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
