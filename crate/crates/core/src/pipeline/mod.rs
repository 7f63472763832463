//! Experiment orchestration: prepare, train, index and evaluate stages with
//! hashed stage reports, plus the pre-train-then-transfer experiment.

mod config;
mod prepare;
mod query;
mod stages;
mod transfer;

pub use config::{
    json_hash, sha256_hex, DatasetSection, ExperimentConfig, QuerySection, RetrievalScope, RetrievalSection, SamplingSection,
    TransferSection,
};
pub use prepare::{materialize, materialize_all, plan_items, Materialized, PreparedItem, Role, Variant};
pub use query::{
    acquire_file, catalog_checkpoint, distances_for_files, embed_file, load_matching_checkpoint, query_file, resample,
    AcquireSettings,
};
pub use stages::{
    assign_cad_splits, catalog_classes, embed, embed_entries, examples_for, file_sha256, load_prepared,
    load_split_manifest, read_evaluation, read_report, read_train_report, report_path, run_all, run_stage,
    stage_config_hash, to_example, EvaluationReport, RetrievalSummary, RunOptions, Stage, StageOutcome,
    StageReport, CATALOG_FILE, CHECKPOINT_FILE, ITEMS_FILE, METRICS_FILE, SENSITIVITY_FILE, SPLIT_MANIFEST,
    TRAIN_REPORT_FILE,
};
pub use transfer::{pretrain_then_transfer, TransferReport};
