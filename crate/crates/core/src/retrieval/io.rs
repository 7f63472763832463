//! Catalog files: `SMCT` magic, u32 version, u32 dtype (1 = f32 LE), u64
//! width, u64 count, then packed rows. Ids, classes and provenance live in a
//! JSON sidecar next to it (`<file>.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{build_catalog, Catalog, CatalogEntry, CatalogMeta};
use crate::datasets::Provenance;
use crate::error::{Error, Result};
use crate::nn::{FeatureVector, Modality};

pub const CATALOG_MAGIC: &[u8; 4] = b"SMCT";
const VERSION: u32 = 1;
const DTYPE_F32: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SidecarEntry {
    model_id: String,
    class_label: String,
    provenance: Provenance,
    modality: Modality,
    source_id: String,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    width: usize,
    count: usize,
    meta: CatalogMeta,
    entries: Vec<SidecarEntry>,
}

pub fn catalog_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Returns (binary rows, JSON sidecar).
pub fn encode_catalog(cat: &Catalog) -> (Vec<u8>, String) {
    let mut bin = Vec::with_capacity(28 + cat.len() * cat.width() * 4);
    bin.extend_from_slice(CATALOG_MAGIC);
    bin.extend_from_slice(&VERSION.to_le_bytes());
    bin.extend_from_slice(&DTYPE_F32.to_le_bytes());
    bin.extend_from_slice(&(cat.width() as u64).to_le_bytes());
    bin.extend_from_slice(&(cat.len() as u64).to_le_bytes());
    for e in cat.entries() {
        for v in &e.feature.values {
            bin.extend_from_slice(&v.to_le_bytes());
        }
    }
    let side = Sidecar {
        width: cat.width(),
        count: cat.len(),
        meta: cat.meta.clone(),
        entries: cat
            .entries()
            .iter()
            .map(|e| SidecarEntry {
                model_id: e.model_id.clone(),
                class_label: e.class_label.clone(),
                provenance: e.provenance,
                modality: e.feature.modality,
                source_id: e.feature.source_id.clone(),
            })
            .collect(),
    };
    (bin, serde_json::to_string_pretty(&side).expect("sidecar serializes") + "\n")
}

pub fn decode_catalog(bin: &[u8], sidecar: &str) -> Result<Catalog> {
    let bad = |m: String| Error::format("catalog", m);
    if bin.len() < 28 || &bin[..4] != CATALOG_MAGIC {
        return Err(bad("missing SMCT magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bin[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bin[o..o + 8].try_into().unwrap()) as usize;
    if u32_at(4) != VERSION {
        return Err(bad(format!("unsupported version {}", u32_at(4))));
    }
    if u32_at(8) != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype code {}", u32_at(8))));
    }
    let (width, count) = (u64_at(12), u64_at(20));
    let body = &bin[28..];
    if body.len() != width * count * 4 {
        return Err(bad(format!("expected {count} rows of width {width}, body has {} bytes", body.len())));
    }
    let side: Sidecar = serde_json::from_str(sidecar).map_err(|e| bad(format!("sidecar: {e}")))?;
    if side.width != width || side.count != count || side.entries.len() != count {
        return Err(bad("sidecar does not match the binary header".into()));
    }
    let entries = side
        .entries
        .into_iter()
        .zip(body.chunks_exact((width * 4).max(1)))
        .map(|(s, row)| CatalogEntry {
            model_id: s.model_id,
            class_label: s.class_label,
            provenance: s.provenance,
            feature: FeatureVector {
                values: row
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                modality: s.modality,
                source_id: s.source_id,
            },
        })
        .collect();
    let mut cat = build_catalog(entries)?;
    cat.meta = side.meta;
    Ok(cat)
}

pub fn write_catalog(cat: &Catalog, path: &Path) -> Result<()> {
    let (bin, side) = encode_catalog(cat);
    std::fs::write(path, bin).map_err(|e| Error::io(path, e))?;
    let sp = catalog_sidecar_path(path);
    std::fs::write(&sp, side).map_err(|e| Error::io(&sp, e))
}

pub fn read_catalog(path: &Path) -> Result<Catalog> {
    let bin = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let sp = catalog_sidecar_path(path);
    let side = std::fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    decode_catalog(&bin, &side)
}
