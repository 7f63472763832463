//! Manifests, stratified splits, corpus adapters and the procedural dataset.

mod adapters;
mod desk;
mod manifest;
mod split;

pub use adapters::{adapt_mcb, adapt_tless, Adapted, AdapterReport, MCB_B_COUNTS, TLESS_OBJECTS};
pub use desk::{desk_model_id, make_desk_dataset, DeskConfig};
pub use manifest::{
    load_manifest, sidecar_path, stratified_split, write_manifest, Manifest, ManifestRow, Provenance, Split,
    MANIFEST_HEADER,
};
pub use split::{stratified_assign, train_count};
