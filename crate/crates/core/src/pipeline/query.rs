use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::sha256_hex;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{normalize_unit_sphere, read_obj, read_point_cloud, sample_surface, PointCloud};
use crate::nn::{checkpoint, classify_joint, FeatureVector, ModelWeights};
use crate::render::{render_points, render_views, RenderConfig, ViewSet};
use crate::retrieval::{pairwise_distances, query, read_catalog, Catalog, CatalogEntry, DistanceTable, RetrievalResult};
use crate::seeds;

/// How a catalog's inputs were acquired, so new inputs are embedded alike.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquireSettings {
    pub render: RenderConfig,
    pub point_count: usize,
    pub seed: u64,
}

impl AcquireSettings {
    pub fn from_catalog(cat: &Catalog) -> Result<Self> {
        let m = &cat.meta;
        match (&m.render, m.point_count, m.seed) {
            (Some(render), Some(point_count), Some(seed)) => Ok(AcquireSettings {
                render: render.clone(),
                point_count,
                seed,
            }),
            _ => Err(Error::Validation(
                "catalog metadata lacks render settings, point count or seed".into(),
            )),
        }
    }
}

fn is_mesh(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("obj"))
}

/// Keeps a seeded subset of `n` points, or tops up with seeded repeats when
/// the cloud is smaller.
pub fn resample(pc: &PointCloud, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = if pc.len() >= n {
        let mut v = sample(&mut rng, pc.len(), n).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..pc.len()).chain((pc.len()..n).map(|_| rng.random_range(0..pc.len()))).collect()
    };
    PointCloud {
        points: idx.into_iter().map(|i| pc.points[i]).collect(),
        source_id: pc.source_id.clone(),
    }
}

/// Renders and samples an OBJ mesh, or normalizes, resamples and
/// splat-renders a point cloud (`.smpc` or `.csv`). The id is the file stem.
pub fn acquire_file(path: &Path, s: &AcquireSettings) -> Result<(ViewSet, PointCloud)> {
    let render_seed = seeds::derive(s.seed, &[seeds::label("render")]);
    if is_mesh(path) {
        let mesh = read_obj(path)?;
        let id = mesh.model_id.clone();
        let mesh = mesh.normalized();
        let seed = seeds::derive(s.seed, &[seeds::label(&id)]);
        let pc = normalize_unit_sphere(&sample_surface(&mesh, s.point_count, seeds::derive(seed, &[2]))?);
        let views = render_views(&mesh, &s.render, render_seed)?;
        Ok((views, pc))
    } else {
        let raw = read_point_cloud(path)?;
        let seed = seeds::derive(s.seed, &[seeds::label(&raw.source_id)]);
        let pc = normalize_unit_sphere(&resample(&raw, s.point_count, seeds::derive(seed, &[6])));
        let mut views = render_points(&pc, &s.render, render_seed)?;
        views.model_id = pc.source_id.clone();
        Ok((views, pc))
    }
}

pub fn embed_file(net: &ModelWeights, path: &Path, s: &AcquireSettings) -> Result<FeatureVector> {
    let (views, pc) = acquire_file(path, s)?;
    let (_, _, mut f) = classify_joint(&views, &pc, net)?;
    f.source_id = pc.source_id;
    Ok(f)
}

/// Checkpoint named by the catalog, resolved against the run directory
/// (two levels above the catalog) and then the catalog's own directory.
pub fn catalog_checkpoint(catalog_path: &Path, cat: &Catalog) -> Result<PathBuf> {
    let rel = cat
        .meta
        .checkpoint_path
        .as_deref()
        .ok_or_else(|| Error::Validation("catalog does not name its checkpoint; pass one explicitly".into()))?;
    let rel = Path::new(rel);
    if rel.is_absolute() {
        return Ok(rel.to_path_buf());
    }
    let dir = catalog_path.parent().unwrap_or(Path::new(""));
    let candidates = [dir.parent().map(|p| p.join(rel)), Some(dir.join(rel))];
    candidates
        .into_iter()
        .flatten()
        .find(|p| p.is_file())
        .ok_or_else(|| Error::Validation(format!("checkpoint {} not found next to the catalog", rel.display())))
}

/// Loads a checkpoint and checks it is the one the catalog was built with.
pub fn load_matching_checkpoint(catalog_path: &Path, cat: &Catalog, explicit: Option<&Path>) -> Result<ModelWeights> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => catalog_checkpoint(catalog_path, cat)?,
    };
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if let Some(want) = &cat.meta.checkpoint_sha256 {
        if *want != sha256_hex(&bytes) {
            return Err(Error::Stale(format!("checkpoint {} differs from the one indexed", path.display())));
        }
    }
    checkpoint::decode_checkpoint(&bytes)
}

/// Embeds `input` like the catalog's own models and returns its top `k`.
pub fn query_file(catalog_path: &Path, input: &Path, k: usize, checkpoint: Option<&Path>) -> Result<RetrievalResult> {
    let cat = read_catalog(catalog_path)?;
    let net = load_matching_checkpoint(catalog_path, &cat, checkpoint)?;
    let f = embed_file(&net, input, &AcquireSettings::from_catalog(&cat)?)?;
    query(&cat, &f, k)
}

/// Embeds each input file and tabulates its distance to every catalog model.
pub fn distances_for_files(
    catalog_path: &Path,
    inputs: &[PathBuf],
    checkpoint: Option<&Path>,
    exec: Exec,
) -> Result<DistanceTable> {
    let cat = read_catalog(catalog_path)?;
    let net = load_matching_checkpoint(catalog_path, &cat, checkpoint)?;
    let s = AcquireSettings::from_catalog(&cat)?;
    let entries = exec.try_map(inputs, |p| {
        let feature = embed_file(&net, p, &s)?;
        Ok(CatalogEntry {
            model_id: feature.source_id.clone(),
            class_label: String::new(),
            feature,
            provenance: crate::datasets::Provenance::Scanned,
        })
    })?;
    pairwise_distances(&cat, &entries, exec)
}
