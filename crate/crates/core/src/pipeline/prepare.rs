use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::datasets::{Manifest, ManifestRow, Provenance, Split};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::math::normalize;
use crate::geometry::{normalize_unit_sphere, occlude, read_obj, sample_surface, PointCloud, TriMesh};
use crate::render::{render_views, ViewSet};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// A CAD model: training example and catalog entry.
    Catalog,
    /// A reconstructed or scanned object to retrieve against the catalog.
    Query,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Clean,
    Partial,
}

/// One prepared input: a catalog model or a query, with its data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedItem {
    pub item_id: String,
    /// Shared by the clean and partial variants of a query.
    pub query_id: Option<String>,
    pub model_id: String,
    pub class_label: String,
    pub split: Split,
    pub provenance: Provenance,
    pub role: Role,
    pub variant: Variant,
    /// Correct catalog model for queries.
    pub truth: Option<String>,
    /// Synthetic reconstruction of `model_id` (vertex noise applied).
    pub synthesized: bool,
    pub views: PathBuf,
    pub points: PathBuf,
}

/// Item plus loaded inputs.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub item: PreparedItem,
    pub views: ViewSet,
    pub cloud: PointCloud,
}

fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect::<String>()
        + &format!("-{:016x}", seeds::label(id))
}

/// Plans catalog and query items for a split manifest.
pub fn plan_items(m: &Manifest, cfg: &ExperimentConfig) -> Vec<PreparedItem> {
    let mut items = Vec::new();
    let base = |row: &ManifestRow, item_id: String, role, variant, truth, query_id, synthesized| {
        let stem = file_stem_for(&item_id);
        PreparedItem {
            query_id,
            model_id: row.model_id.clone(),
            class_label: row.class_label.clone(),
            split: row.split,
            provenance: row.provenance,
            role,
            variant,
            truth,
            synthesized,
            views: PathBuf::from("views").join(format!("{stem}.smvw")),
            points: PathBuf::from("points").join(format!("{stem}.smpc")),
            item_id,
        }
    };
    let cad: Vec<&ManifestRow> = m.rows.iter().filter(|r| r.provenance == Provenance::Cad).collect();
    for r in &cad {
        items.push(base(r, r.model_id.clone(), Role::Catalog, Variant::Clean, None, None, false));
    }
    let scans: Vec<&ManifestRow> = m.rows.iter().filter(|r| r.provenance != Provenance::Cad).collect();
    let mut by_class: HashMap<&str, Vec<&str>> = HashMap::new();
    for r in &cad {
        by_class.entry(&r.class_label).or_default().push(&r.model_id);
    }
    let mut push_query = |r: &ManifestRow, qid: String, truth: Option<String>, synth: bool| {
        items.push(base(r, qid.clone(), Role::Query, Variant::Clean, truth.clone(), Some(qid.clone()), synth));
        items.push(base(r, format!("{qid}@partial"), Role::Query, Variant::Partial, truth, Some(qid), synth));
    };
    if !scans.is_empty() {
        for r in scans {
            // a scan's counterpart is the single CAD model sharing its label
            let truth = match by_class.get(r.class_label.as_str()) {
                Some(v) if v.len() == 1 => Some(v[0].to_string()),
                _ => None,
            };
            push_query(r, r.model_id.clone(), truth, false);
        }
    } else if cfg.queries.synthesize {
        for r in &cad {
            push_query(r, format!("{}#recon", r.model_id), Some(r.model_id.clone()), true);
        }
    }
    items
}

/// Smooth random warp: a sum of four random plane waves, each displacing
/// vertices by a Gaussian amplitude vector scaled so the per-axis std-dev of
/// the displacement is `sigma`. Neighbouring vertices move together, so faces
/// keep their orientation the way a fused reconstruction does.
fn warp_vertices(mesh: &TriMesh, sigma: f64, seed: u64) -> TriMesh {
    if sigma <= 0.0 {
        return mesh.clone();
    }
    const WAVES: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = Normal::new(0.0, sigma * (2.0 / WAVES as f64).sqrt()).expect("finite sigma");
    let waves: Vec<([f64; 3], f64, [f64; 3])> = (0..WAVES)
        .map(|_| {
            let k = std::array::from_fn(|_| rand_distr::StandardNormal.sample(&mut rng)).map(|v: f64| v * 2.0);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            let a = std::array::from_fn(|_| amp.sample(&mut rng));
            (k, phase, a)
        })
        .collect();
    mesh.map_vertices(|v| {
        let mut out = v;
        for (k, phase, a) in &waves {
            let s = (crate::geometry::math::dot(*k, v) + phase).sin();
            for c in 0..3 {
                out[c] += a[c] * s;
            }
        }
        out
    })
}

fn random_direction(seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rand_distr::StandardNormal.sample(&mut rng));
        if let Some(d) = normalize(v) {
            return d;
        }
    }
}

/// Renders and samples one item. Partial queries sample twice the target
/// count, cut away the configured fraction along a seeded direction, and
/// keep a seeded subset of the target size; their views show the mesh
/// clipped at the same plane.
pub fn materialize(item: &PreparedItem, mesh: &TriMesh, cfg: &ExperimentConfig) -> Result<(ViewSet, PointCloud)> {
    let seed = seeds::derive(cfg.seed, &[seeds::label(&item.item_id)]);
    let mut mesh = mesh.normalized();
    if item.synthesized {
        // both variants of a query share the same noisy reconstruction
        let qid = item.query_id.as_deref().unwrap_or(&item.item_id);
        let noise_seed = seeds::derive(cfg.seed, &[seeds::label(qid), 3]);
        mesh = warp_vertices(&mesh, cfg.queries.vertex_noise, noise_seed).normalized();
    }
    let n = cfg.sampling.point_count;
    let id = item.item_id.clone();
    mesh.model_id = id.clone();
    let (render_mesh, cloud) = match item.variant {
        Variant::Clean => {
            let pc = sample_surface(&mesh, n, seeds::derive(seed, &[2]))?;
            (mesh, pc)
        }
        Variant::Partial => {
            let f = cfg.queries.occlusion_fraction;
            let dir = random_direction(seeds::derive(seed, &[4]));
            let total = ((n as f64) / (1.0 - f)).ceil() as usize + 1;
            let dense = sample_surface(&mesh, total, seeds::derive(seed, &[2]))?;
            let kept = occlude(&dense, dir, f, seeds::derive(seed, &[5]))?;
            if kept.len() < n {
                return Err(Error::DegenerateGeometry(format!(
                    "partial scan of `{id}` kept {} points, need {n}",
                    kept.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[6]));
            let mut pick = sample(&mut rng, kept.len(), n).into_vec();
            pick.sort_unstable();
            let plane = kept
                .points
                .iter()
                .map(|&p| crate::geometry::math::dot(p, dir))
                .fold(f64::NEG_INFINITY, f64::max);
            let clipped = mesh.clip_half_space(dir, plane).unwrap_or(mesh);
            let pc = PointCloud {
                points: pick.into_iter().map(|i| kept.points[i]).collect(),
                source_id: id.clone(),
            };
            (clipped, pc)
        }
    };
    // every model shares the per-view backgrounds so renders differ only in geometry
    let views = render_views(&render_mesh, &cfg.render, cfg.stream("render"))?;
    let mut cloud = normalize_unit_sphere(&cloud);
    cloud.source_id = id;
    Ok((views, cloud))
}

/// Loads meshes and materializes every item in order.
pub fn materialize_all(
    m: &Manifest,
    items: &[PreparedItem],
    cfg: &ExperimentConfig,
    exec: Exec,
) -> Result<Vec<Materialized>> {
    let paths: HashMap<&str, PathBuf> = m.rows.iter().map(|r| (r.model_id.as_str(), m.resolve(r))).collect();
    exec.try_map(items, |item| {
        let path = &paths[item.model_id.as_str()];
        let mesh = read_obj(path)?;
        let (views, cloud) = materialize(item, &mesh, cfg)?;
        Ok(Materialized {
            item: item.clone(),
            views,
            cloud,
        })
    })
}

pub fn write_materialized(dir: &Path, all: &[Materialized], exec: Exec) -> Result<()> {
    for sub in ["views", "points"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    exec.try_map(all, |m| {
        crate::render::write_viewset(&m.views, &dir.join(&m.item.views))?;
        crate::geometry::write_point_cloud(&m.cloud, &dir.join(&m.item.points))
    })?;
    Ok(())
}

pub fn load_materialized(dir: &Path, items: &[PreparedItem], exec: Exec) -> Result<Vec<Materialized>> {
    exec.try_map(items, |item| {
        let mut views = crate::render::read_viewset(&dir.join(&item.views))?;
        views.model_id = item.item_id.clone();
        let mut cloud = crate::geometry::read_point_cloud(&dir.join(&item.points))?;
        cloud.source_id = item.item_id.clone();
        Ok(Materialized {
            item: item.clone(),
            views,
            cloud,
        })
    })
}
