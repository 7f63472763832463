//! Wavefront OBJ reading and writing. Only `v` and `f` records matter;
//! texture coordinates, normals, groups and materials are skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

pub fn parse_obj(bytes: &[u8], model_id: &str) -> Result<TriMesh> {
    let text = String::from_utf8_lossy(bytes);
    let mut vertices: Vec<Vec3> = Vec::new();
    // (line number, resolved zero-based indices)
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0; 3];
                for slot in xyz.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| Error::ObjParse {
                        line: line_no,
                        message: "vertex needs three coordinates".into(),
                    })?;
                    *slot = tok.parse().map_err(|_| Error::ObjParse {
                        line: line_no,
                        message: format!("bad coordinate `{tok}`"),
                    })?;
                }
                vertices.push(xyz);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw_idx: i64 = head.parse().map_err(|_| Error::ObjParse {
                        line: line_no,
                        message: format!("bad face index `{tok}`"),
                    })?;
                    let resolved = match raw_idx {
                        0 => {
                            return Err(Error::ObjParse {
                                line: line_no,
                                message: "face index 0 is invalid (OBJ is 1-based)".into(),
                            })
                        }
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    if resolved < 0 {
                        return Err(Error::ObjParse {
                            line: line_no,
                            message: format!("relative index {raw_idx} reaches before first vertex"),
                        });
                    }
                    idx.push(resolved);
                }
                if idx.len() < 3 {
                    return Err(Error::ObjParse {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, got {}", idx.len()),
                    });
                }
                polys.push((line_no, idx));
            }
            _ => {}
        }
    }

    let mut faces = Vec::new();
    for (line_no, idx) in polys {
        if let Some(&bad) = idx.iter().find(|&&i| i as usize >= vertices.len()) {
            return Err(Error::ObjParse {
                line: line_no,
                message: format!(
                    "face index {} out of range ({} vertices)",
                    bad + 1,
                    vertices.len()
                ),
            });
        }
        // fan triangulation around the first corner
        for k in 1..idx.len() - 1 {
            faces.push([idx[0] as usize, idx[k] as usize, idx[k + 1] as usize]);
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    TriMesh::new(vertices, faces, model_id, None)
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_obj(&bytes, &id)
}

/// Serializes with fixed 6-decimal coordinates so output bytes depend only
/// on the mesh.
pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 20);
    let _ = writeln!(out, "# {}", mesh.model_id);
    if let Some(c) = &mesh.class_label {
        let _ = writeln!(out, "# class {c}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
