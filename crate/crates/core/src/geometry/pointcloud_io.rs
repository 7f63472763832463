//! Point cloud persistence.
//!
//! Binary layout (all little-endian):
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `SMPC`              |
//! | 4      | 4    | u32 version (1)           |
//! | 8      | 8    | u64 point count N         |
//! | 16     | 4    | u32 components (always 3) |
//! | 20     | 24N  | f64 x, y, z per point     |
//!
//! CSV is one `x,y,z` line per point with no header.

use std::io::Write;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

pub const POINT_CLOUD_MAGIC: &[u8; 4] = b"SMPC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointCloudFormat {
    Binary,
    Csv,
}

impl PointCloudFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => PointCloudFormat::Csv,
            _ => PointCloudFormat::Binary,
        }
    }
}

pub fn encode_point_cloud(pc: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + pc.len() * 24);
    out.extend_from_slice(POINT_CLOUD_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(pc.len() as u64).to_le_bytes());
    out.extend_from_slice(&3u32.to_le_bytes());
    for p in &pc.points {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_point_cloud(bytes: &[u8], source_id: &str) -> Result<PointCloud> {
    let bad = |m: &str| Error::format("point cloud", m);
    if bytes.len() < 20 || &bytes[..4] != POINT_CLOUD_MAGIC {
        return Err(bad("missing SMPC header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != 1 {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dims = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if dims != 3 {
        return Err(bad(&format!("expected 3 components, got {dims}")));
    }
    let body = &bytes[20..];
    if body.len() != n * 24 {
        return Err(bad(&format!("expected {} payload bytes, got {}", n * 24, body.len())));
    }
    let points = body
        .chunks_exact(24)
        .map(|c| {
            let f = |k: usize| f64::from_le_bytes(c[k * 8..k * 8 + 8].try_into().unwrap());
            [f(0), f(1), f(2)]
        })
        .collect();
    PointCloud::new(points, source_id)
}

pub fn write_point_cloud(pc: &PointCloud, path: &Path) -> Result<()> {
    let bytes = match PointCloudFormat::from_path(path) {
        PointCloudFormat::Binary => encode_point_cloud(pc),
        PointCloudFormat::Csv => {
            let mut out = Vec::new();
            for p in &pc.points {
                writeln!(out, "{},{},{}", p[0], p[1], p[2]).expect("write to vec");
            }
            out
        }
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match PointCloudFormat::from_path(path) {
        PointCloudFormat::Binary => decode_point_cloud(&bytes, &id),
        PointCloudFormat::Csv => {
            let text = String::from_utf8_lossy(&bytes);
            let mut points = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format("point cloud csv", format!("line {}: bad number", i + 1)))?;
                if vals.len() != 3 {
                    return Err(Error::format(
                        "point cloud csv",
                        format!("line {}: expected 3 values", i + 1),
                    ));
                }
                points.push([vals[0], vals[1], vals[2]]);
            }
            PointCloud::new(points, id)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn binary_and_csv_round_trip(pts in prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), 1..50)) {
            let pc = PointCloud::new(pts, "x").unwrap();
            let dir = tempfile::tempdir().unwrap();
            for name in ["x.pcb", "x.csv"] {
                let p = dir.path().join(name);
                write_point_cloud(&pc, &p).unwrap();
                prop_assert_eq!(read_point_cloud(&p).unwrap(), pc.clone());
            }
        }
    }

    #[test]
    fn header_layout() {
        let pc = PointCloud::new(vec![[1.0, 2.0, 3.0]], "x").unwrap();
        let b = encode_point_cloud(&pc);
        assert_eq!(&b[..4], b"SMPC");
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 3);
        assert_eq!(b.len(), 20 + 24);
        assert!(decode_point_cloud(&b[..30], "x").is_err());
    }
}
