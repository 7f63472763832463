use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::DeskConfig;
use crate::error::{Error, Result};
use crate::nn::{ArchConfig, BlockSpec, TrainConfig};
use crate::render::{AugmentParams, RenderConfig};
use crate::seeds;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    /// Name recorded in reports; defaults to `desk` or the manifest's file stem.
    pub name: Option<String>,
    /// Existing manifest CSV. When absent a procedural dataset is generated.
    pub manifest: Option<PathBuf>,
    pub desk: DeskConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSection {
    pub point_count: usize,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { point_count: 2048 }
    }
}

/// How retrieval queries are produced when the corpus has no scans of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuerySection {
    /// Synthesize a reconstructed query per CAD model when the manifest has
    /// no reconstructed or scanned rows.
    pub synthesize: bool,
    /// Std-dev of Gaussian vertex noise on the unit-normalized mesh.
    pub vertex_noise: f64,
    /// Fraction of points removed for partial-scan queries.
    pub occlusion_fraction: f64,
}

impl Default for QuerySection {
    fn default() -> Self {
        QuerySection {
            synthesize: true,
            vertex_noise: 0.01,
            occlusion_fraction: 0.5,
        }
    }
}

/// Which CAD models a held-out query is ranked against during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalScope {
    /// Only test-split models, none of which the network trained on.
    Heldout,
    /// Every CAD model in the catalog.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSection {
    pub ks: Vec<usize>,
    /// Fixed match threshold; calibrated on training-split queries when absent.
    pub threshold: Option<f64>,
    pub scope: RetrievalScope,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection {
            ks: vec![1, 3, 5],
            threshold: None,
            scope: RetrievalScope::Heldout,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferSection {
    /// Pre-train on every source row instead of only its training split.
    pub use_full_source: bool,
    /// Also train on the target's CAD rows and report it as a baseline corpus.
    pub target_baseline: bool,
}

/// One experiment. `arch.image_side`, `arch.view_count`, `arch.point_count`
/// and `arch.classes` are filled from the render, sampling and dataset
/// sections; section-level seeds are replaced by streams derived from the
/// global `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub render: RenderConfig,
    pub sampling: SamplingSection,
    pub queries: QuerySection,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub retrieval: RetrievalSection,
    pub transfer: TransferSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            dataset: DatasetSection::default(),
            render: RenderConfig::default(),
            sampling: SamplingSection::default(),
            queries: QuerySection::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            retrieval: RetrievalSection::default(),
            transfer: TransferSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Laptop-CPU configuration: 64 px views, a slim image backbone and a
    /// shortened schedule.
    pub fn desk() -> Self {
        let b = |expansion, channels, repeats, stride| BlockSpec {
            expansion,
            channels,
            repeats,
            stride,
        };
        let mut cfg = ExperimentConfig {
            output_dir: PathBuf::from("runs/desk"),
            ..Default::default()
        };
        cfg.render.image_side = 64;
        cfg.arch.stem_channels = 8;
        cfg.arch.blocks = vec![b(1, 8, 1, 1), b(4, 16, 2, 2), b(4, 24, 1, 2), b(4, 32, 1, 2)];
        cfg.train.phase1_epochs = 10;
        cfg.train.phase2_epochs = 20;
        cfg.train.phase1_lr = 0.02;
        cfg.train.phase2_lr = 0.002;
        cfg.train.augment = AugmentParams::default();
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths in the file resolve against the file's directory
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let Some(m) = cfg.dataset.manifest.as_mut() {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sampling.point_count == 0 {
            return bad("sampling.point_count must be positive");
        }
        if self.render.view_count == 0 || self.render.image_side < 8 {
            return bad("render needs at least one view of at least 8 px");
        }
        if !(0.0..1.0).contains(&self.queries.occlusion_fraction) || self.queries.vertex_noise < 0.0 {
            return bad("queries.occlusion_fraction must lie in [0, 1) and vertex_noise be nonnegative");
        }
        if self.retrieval.ks.is_empty() || self.retrieval.ks.contains(&0) {
            return bad("retrieval.ks must be nonempty positive ranks");
        }
        if self.retrieval.threshold.is_some_and(|t| !(t > 0.0)) {
            return bad("retrieval.threshold must be positive");
        }
        self.train.validate()
    }

    pub fn dataset_name(&self) -> String {
        if let Some(n) = &self.dataset.name {
            return n.clone();
        }
        match &self.dataset.manifest {
            Some(p) => p
                .file_stem()
                .map_or("manifest".into(), |s| s.to_string_lossy().to_string()),
            None => "desk".into(),
        }
    }

    pub fn stream(&self, name: &str) -> u64 {
        seeds::derive(self.seed, &[seeds::label(name)])
    }

    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.stream("train"),
            ..self.train.clone()
        }
    }

    pub fn effective_desk(&self) -> DeskConfig {
        DeskConfig {
            seed: self.stream("dataset"),
            ..self.dataset.desk.clone()
        }
    }

    pub fn resolved_arch(&self, classes: Vec<String>) -> ArchConfig {
        ArchConfig {
            classes,
            image_side: self.render.image_side,
            view_count: self.render.view_count,
            point_count: self.sampling.point_count,
            ..self.arch.clone()
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn json_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("value serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_desk_file_matches_the_preset() {
        let shipped = ExperimentConfig::from_toml(include_str!("../../../../configs/desk.toml")).unwrap();
        assert_eq!(shipped, ExperimentConfig::desk());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = ExperimentConfig::desk();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = ExperimentConfig::from_toml("seed = 7\n[train]\nphase1_epochs = 3\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.train.phase1_epochs, 3);
        assert_eq!(partial.train.phase2_epochs, 40);
        assert_eq!(partial.sampling.point_count, 2048);
    }

    #[test]
    fn reference_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.render.image_side, 224);
        assert_eq!(c.render.view_count, 4);
        assert_eq!((c.train.phase1_epochs, c.train.phase2_epochs), (20, 40));
        assert_eq!(c.train.train_fraction, 0.8);
        assert_eq!(c.arch.point_layers, vec![64, 64, 128, 256]);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml("[retrieval]\nks = []\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(ExperimentConfig::from_toml("seed = \"x\""), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_toml("[train]\ntrain_fraction = 1.0\n"),
            Err(Error::Config(_))
        ));
    }
}
