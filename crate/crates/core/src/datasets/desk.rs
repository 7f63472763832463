use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, Manifest, ManifestRow, Provenance, Split};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{gen_procedural, write_obj, ShapeParams, GENERATOR_CLASSES};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub classes: Vec<String>,
    pub per_class: usize,
    pub seed: u64,
    pub shape: ShapeParams,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            classes: GENERATOR_CLASSES.iter().map(|s| s.to_string()).collect(),
            per_class: 40,
            seed: 0,
            shape: ShapeParams::default(),
        }
    }
}

pub fn desk_model_id(class: &str, index: usize) -> String {
    format!("{class}-{index:03}")
}

/// Generates `per_class` procedural meshes per class under `out/meshes/` and
/// writes `out/manifest.csv`. Rows are left unassigned.
pub fn make_desk_dataset(cfg: &DeskConfig, out: &Path, exec: Exec) -> Result<Manifest> {
    if cfg.classes.is_empty() || cfg.per_class == 0 {
        return Err(Error::Config("desk dataset needs classes and per_class >= 1".into()));
    }
    let jobs: Vec<(String, usize)> = cfg
        .classes
        .iter()
        .flat_map(|c| (0..cfg.per_class).map(move |i| (c.clone(), i)))
        .collect();
    for c in &cfg.classes {
        let dir = out.join("meshes").join(c);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let rows = exec.try_map(&jobs, |(class, i)| {
        let seed = seeds::derive(cfg.seed, &[seeds::label(class), *i as u64]);
        let mut mesh = gen_procedural(class, &cfg.shape, seed)?;
        mesh.model_id = desk_model_id(class, *i);
        let rel: PathBuf = ["meshes", class.as_str(), &format!("{}.obj", mesh.model_id)].iter().collect();
        write_obj(&mesh, &out.join(&rel))?;
        Ok::<_, Error>(ManifestRow {
            model_id: mesh.model_id,
            class_label: class.clone(),
            mesh_path: rel,
            split: Split::Unassigned,
            provenance: Provenance::Cad,
        })
    })?;
    let m = Manifest::new(rows, out)?;
    write_manifest(&m, &out.join("manifest.csv"))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::stratified_split;

    #[test]
    fn generates_rows_and_is_byte_stable() {
        let cfg = DeskConfig {
            classes: vec!["washer".into(), "gear".into()],
            per_class: 3,
            seed: 5,
            ..DeskConfig::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = make_desk_dataset(&cfg, a.path(), Exec::Parallel).unwrap();
        make_desk_dataset(&cfg, b.path(), Exec::Sequential).unwrap();
        assert_eq!(ma.len(), 6);
        for r in &ma.rows {
            let x = std::fs::read(a.path().join(&r.mesh_path)).unwrap();
            let y = std::fs::read(b.path().join(&r.mesh_path)).unwrap();
            assert_eq!(x, y);
        }
        let loaded = crate::datasets::load_manifest(&a.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded.rows, ma.rows);
    }

    #[test]
    fn single_model_per_class_cannot_split() {
        let cfg = DeskConfig {
            classes: vec!["nut".into(), "pipe".into()],
            per_class: 1,
            ..DeskConfig::default()
        };
        let d = tempfile::tempdir().unwrap();
        let m = make_desk_dataset(&cfg, d.path(), Exec::Sequential).unwrap();
        assert!(matches!(stratified_split(&m, 0.8, 0), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn unknown_class_propagates() {
        let cfg = DeskConfig {
            classes: vec!["teapot".into()],
            per_class: 2,
            ..DeskConfig::default()
        };
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(
            make_desk_dataset(&cfg, d.path(), Exec::Sequential),
            Err(Error::UnsupportedClass(_))
        ));
    }
}
