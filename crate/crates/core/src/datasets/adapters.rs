use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::manifest::{Manifest, ManifestRow, Provenance, Split};
use crate::error::{Error, Result};

/// Published per-class model counts of the MCB-B corpus.
pub const MCB_B_COUNTS: [(&str, usize); 25] = [
    ("Bearings", 1117),
    ("Bushes", 592),
    ("Castors", 1109),
    ("Clamps", 157),
    ("Discs", 109),
    ("Fittings", 1756),
    ("Flanges", 398),
    ("Fork joints", 47),
    ("Gears", 515),
    ("Handles", 1751),
    ("Hinges", 61),
    ("Hooks", 122),
    ("Motors", 746),
    ("Nuts", 1069),
    ("Pins", 2659),
    ("Plates", 366),
    ("Pullies", 312),
    ("Rings", 551),
    ("Rivets", 51),
    ("Rotors", 470),
    ("Screws", 3661),
    ("Springs", 348),
    ("Studs", 352),
    ("Switches", 177),
    ("Washers", 880),
];

/// Number of T-LESS objects that have both a CAD model and a reconstruction.
pub const TLESS_OBJECTS: usize = 30;

/// Everything an adapter excluded or found suspicious.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdapterReport {
    pub warnings: Vec<String>,
    pub excluded: Vec<(PathBuf, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adapted {
    pub manifest: Manifest,
    /// (cad model_id, reconstructed model_id) retrieval ground truth.
    pub pairs: Vec<(String, String)>,
    pub report: AdapterReport,
}

fn class_key(name: &str) -> String {
    let k: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    k.strip_suffix("es")
        .filter(|s| s.ends_with("sh") || s.ends_with("ch"))
        .or_else(|| k.strip_suffix('s'))
        .unwrap_or(&k)
        .to_string()
}

fn is_obj(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"))
}

fn sorted_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

/// Collects OBJ files under `dir` in sorted order; anything else lands in
/// the report's exclusion list.
fn meshes_under(dir: &Path, report: &mut AdapterReport) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in WalkDir::new(dir).sort_by_file_name().into_iter().filter_map(|e| e.ok()) {
        if !e.file_type().is_file() {
            continue;
        }
        if is_obj(e.path()) {
            out.push(e.path().to_path_buf());
        } else {
            report.excluded.push((e.path().to_path_buf(), "not an .obj mesh".into()));
        }
    }
    out
}

fn rel(root: &Path, p: &Path) -> PathBuf {
    p.strip_prefix(root).unwrap_or(p).to_path_buf()
}

fn stem_id(root: &Path, p: &Path) -> String {
    rel(root, p).with_extension("").to_string_lossy().replace('\\', "/")
}

/// MCB layout: one folder per class under `root`, meshes anywhere below it.
pub fn adapt_mcb(root: &Path) -> Result<Adapted> {
    if !root.is_dir() {
        return Err(Error::Layout(format!("{} is not a directory", root.display())));
    }
    let mut report = AdapterReport::default();
    let mut rows = Vec::new();
    for dir in sorted_dirs(root)? {
        let class = dir.file_name().unwrap().to_string_lossy().to_string();
        let meshes = meshes_under(&dir, &mut report);
        if meshes.is_empty() {
            return Err(Error::Layout(format!("class folder `{class}` contains no .obj meshes")));
        }
        rows.extend(meshes.iter().map(|p| ManifestRow {
            model_id: stem_id(root, p),
            class_label: class.clone(),
            mesh_path: rel(root, p),
            split: Split::Unassigned,
            provenance: Provenance::Cad,
        }));
    }
    if rows.is_empty() {
        return Err(Error::Layout(format!("{} has no class folders", root.display())));
    }
    let manifest = Manifest::new(rows, root)?;
    let inv = manifest.inventory();
    let published: BTreeMap<String, (&str, usize)> =
        MCB_B_COUNTS.iter().map(|&(n, c)| (class_key(n), (n, c))).collect();
    if inv.len() != MCB_B_COUNTS.len() {
        report.warnings.push(format!(
            "found {} classes, the MCB-B release lists {}",
            inv.len(),
            MCB_B_COUNTS.len()
        ));
    }
    for (class, &n) in &inv {
        match published.get(&class_key(class)) {
            Some(&(name, c)) if c != n => report
                .warnings
                .push(format!("class `{class}` has {n} models, MCB-B lists {c} for {name}")),
            Some(_) => {}
            None => report.warnings.push(format!("class `{class}` is not an MCB-B class")),
        }
    }
    Ok(Adapted {
        manifest,
        pairs: Vec::new(),
        report,
    })
}

/// T-LESS layout: `root/cad/` and `root/reconstructed/`, paired by file stem.
/// Each object is its own class.
pub fn adapt_tless(root: &Path) -> Result<Adapted> {
    let cad_dir = root.join("cad");
    let rec_dir = root.join("reconstructed");
    for d in [&cad_dir, &rec_dir] {
        if !d.is_dir() {
            return Err(Error::Layout(format!("missing directory {}", d.display())));
        }
    }
    let mut report = AdapterReport::default();
    let mut by_stem: BTreeMap<String, [Option<PathBuf>; 2]> = BTreeMap::new();
    for (slot, dir) in [&cad_dir, &rec_dir].into_iter().enumerate() {
        for p in meshes_under(dir, &mut report) {
            let stem = rel(dir, &p).with_extension("").to_string_lossy().replace('\\', "/");
            by_stem.entry(stem).or_default()[slot] = Some(p);
        }
    }
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (stem, [cad, rec]) in &by_stem {
        let mut ids = [None, None];
        for (k, (path, prov)) in [(cad, Provenance::Cad), (rec, Provenance::Reconstructed)].into_iter().enumerate() {
            if let Some(p) = path {
                let id = format!("{}/{stem}", prov.as_str());
                rows.push(ManifestRow {
                    model_id: id.clone(),
                    class_label: stem.clone(),
                    mesh_path: rel(root, p),
                    split: Split::Unassigned,
                    provenance: prov,
                });
                ids[k] = Some(id);
            }
        }
        match ids {
            [Some(c), Some(r)] => pairs.push((c, r)),
            _ => report
                .warnings
                .push(format!("object `{stem}` is unpaired; excluded from retrieval truth")),
        }
    }
    if rows.is_empty() {
        return Err(Error::Layout(format!("{} contains no meshes", root.display())));
    }
    if pairs.len() != TLESS_OBJECTS {
        report.warnings.push(format!(
            "{} paired objects found, expected {TLESS_OBJECTS}",
            pairs.len()
        ));
    }
    Ok(Adapted {
        manifest: Manifest::new(rows, root)?,
        pairs,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

    #[test]
    fn class_keys_match_folder_spellings() {
        assert_eq!(class_key("Fork joints"), class_key("fork_joint"));
        assert_eq!(class_key("Bushes"), class_key("bush"));
        assert_eq!(class_key("Switches"), class_key("switch"));
        assert_eq!(class_key("Gears"), class_key("gear"));
        assert_eq!(MCB_B_COUNTS.len(), 25);
        assert!(MCB_B_COUNTS.contains(&("Fork joints", 47)));
    }

    #[test]
    fn mcb_with_all_classes() {
        let d = tempfile::tempdir().unwrap();
        for (name, _) in MCB_B_COUNTS {
            let dir = d.path().join(name.replace(' ', "_"));
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(dir.join("m1.obj"), TRI).unwrap();
        }
        std::fs::write(d.path().join("Gears/readme.txt"), "x").unwrap();
        let a = adapt_mcb(d.path()).unwrap();
        assert_eq!(a.manifest.inventory().len(), 25);
        assert_eq!(a.report.excluded.len(), 1);
        // every class differs from the published count
        assert_eq!(a.report.warnings.len(), 25);
    }

    #[test]
    fn mcb_empty_folder_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(d.path().join("gears")).unwrap();
        assert!(matches!(adapt_mcb(d.path()), Err(Error::Layout(_))));
    }

    #[test]
    fn tless_pairs_by_stem() {
        let d = tempfile::tempdir().unwrap();
        for sub in ["cad", "reconstructed"] {
            std::fs::create_dir_all(d.path().join(sub)).unwrap();
        }
        for i in 1..=30 {
            std::fs::write(d.path().join(format!("cad/obj_{i:02}.obj")), TRI).unwrap();
            std::fs::write(d.path().join(format!("reconstructed/obj_{i:02}.obj")), TRI).unwrap();
        }
        std::fs::write(d.path().join("cad/obj_31.obj"), TRI).unwrap();
        let a = adapt_tless(d.path()).unwrap();
        assert_eq!(a.pairs.len(), 30);
        assert_eq!(a.manifest.len(), 61);
        assert_eq!(a.report.warnings.len(), 1);
        assert_eq!(a.pairs[0], ("cad/obj_01".to_string(), "reconstructed/obj_01".to_string()));
    }
}
