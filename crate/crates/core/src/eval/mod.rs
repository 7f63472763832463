//! Classification and retrieval metrics, PCA export and sensitivity reports.

mod metrics;
mod pca;
mod sensitivity;

pub use metrics::{class_metrics, topk_accuracy, ClassMetrics, MetricsReport};
pub use pca::{pca_project, Pca};
pub use sensitivity::{
    histogram, sensitivity_report, CorpusDistances, CorpusQueries, PartialRow, PartialSummary, SensitivityReport,
};
