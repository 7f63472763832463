use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::split::stratified_assign;
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["model_id", "class_label", "mesh_path", "split", "provenance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    /// Not yet split; adapters and the generator emit this.
    Unassigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cad,
    Reconstructed,
    Scanned,
}

macro_rules! str_enum {
    ($t:ty { $($v:ident => $s:literal),* }) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),* }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(format!("unknown {} `{other}`", stringify!($t).to_lowercase())),
                }
            }
        }
    };
}

str_enum!(Split { Train => "train", Test => "test", Unassigned => "unassigned" });
str_enum!(Provenance { Cad => "cad", Reconstructed => "reconstructed", Scanned => "scanned" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub model_id: String,
    pub class_label: String,
    /// As written in the CSV; relative paths resolve against the manifest's directory.
    pub mesh_path: PathBuf,
    pub split: Split,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Base directory for relative mesh paths.
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>, root: impl Into<PathBuf>) -> Result<Self> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            if let Some(first) = seen.insert(r.model_id.as_str(), i) {
                return Err(Error::Manifest {
                    row: i + 1,
                    message: format!("duplicate model_id `{}` (also row {})", r.model_id, first + 1),
                });
            }
        }
        Ok(Manifest {
            rows,
            root: root.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        if row.mesh_path.is_absolute() {
            row.mesh_path.clone()
        } else {
            self.root.join(&row.mesh_path)
        }
    }

    /// Class label → model count, sorted by label.
    pub fn inventory(&self) -> BTreeMap<String, usize> {
        let mut inv = BTreeMap::new();
        for r in &self.rows {
            *inv.entry(r.class_label.clone()).or_insert(0) += 1;
        }
        inv
    }

    /// Sorted class labels; index = network class id.
    pub fn class_names(&self) -> Vec<String> {
        self.inventory().into_keys().collect()
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.model_id.as_str()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ClassSidecar {
    classes: BTreeMap<String, usize>,
    total: usize,
}

pub fn sidecar_path(manifest: &Path) -> PathBuf {
    let mut s = manifest.as_os_str().to_owned();
    s.push(".classes.json");
    PathBuf::from(s)
}

/// Reads and validates a manifest CSV. Every mesh path must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = rdr.headers().map_err(|e| Error::Manifest {
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().map(str::trim).ne(MANIFEST_HEADER) {
        return Err(Error::Manifest {
            row: 0,
            message: format!("header must be `{}`", MANIFEST_HEADER.join(",")),
        });
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let err = |message: String| Error::Manifest { row, message };
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", rec.len())));
        }
        let f = |k: usize| rec[k].trim().to_string();
        if f(0).is_empty() || f(1).is_empty() {
            return Err(err("empty model_id or class_label".into()));
        }
        let r = ManifestRow {
            model_id: f(0),
            class_label: f(1),
            mesh_path: PathBuf::from(f(2)),
            split: f(3).parse().map_err(err)?,
            provenance: f(4).parse().map_err(err)?,
        };
        let resolved = if r.mesh_path.is_absolute() {
            r.mesh_path.clone()
        } else {
            root.join(&r.mesh_path)
        };
        if !resolved.is_file() {
            return Err(err(format!("mesh path {} does not exist", resolved.display())));
        }
        rows.push(r);
    }
    Manifest::new(rows, root)
}

/// Writes the CSV and its class-inventory sidecar.
pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::format("manifest", e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for r in &m.rows {
        let mesh = r.mesh_path.to_string_lossy();
        w.write_record([
            r.model_id.as_str(),
            r.class_label.as_str(),
            mesh.as_ref(),
            r.split.as_str(),
            r.provenance.as_str(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = ClassSidecar {
        classes: m.inventory(),
        total: m.len(),
    };
    let json = serde_json::to_string_pretty(&side).expect("inventory serializes");
    let sp = sidecar_path(path);
    std::fs::write(&sp, json + "\n").map_err(|e| Error::io(&sp, e))
}

/// Assigns `train`/`test` per class so each class is within one model of
/// `train_fraction`; deterministic per seed.
pub fn stratified_split(m: &Manifest, train_fraction: f64, seed: u64) -> Result<Manifest> {
    let classes: Vec<&str> = m.rows.iter().map(|r| r.class_label.as_str()).collect();
    let assign = stratified_assign(&classes, train_fraction, seed)?;
    let rows = m
        .rows
        .iter()
        .zip(assign)
        .map(|(r, t)| ManifestRow {
            split: if t { Split::Train } else { Split::Test },
            ..r.clone()
        })
        .collect();
    Ok(Manifest {
        rows,
        root: m.root.clone(),
    })
}
