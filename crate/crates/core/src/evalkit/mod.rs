//! Metrics, diagnostics, sweeps and retrieval.

mod analysis;
mod metrics;
mod report;
mod retrieval;
mod sweep;
mod zsl;

pub use analysis::{confusion_matrix, entropy_histogram, ConfusionMatrix, EntropyHistogram};
pub use metrics::{harmonic_mean, per_class_accuracy, per_class_top1, MetricsReport};
pub use report::{write_json, write_metrics_csv, write_sweep_csv};
pub use retrieval::{
    average_precision, class_query, rank_gallery, retrieval_map, retrieve, RetrievalReport,
    RetrievalResult,
};
pub use sweep::{parse_values, sweep, SweepAxis, SweepResult, SweepRow};
pub use zsl::{zsl_accuracy, DEFAULT_ZSL_PER_CLASS};
