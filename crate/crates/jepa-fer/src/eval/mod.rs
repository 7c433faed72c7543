//! Whole-video evaluation: voting, UAR/WAR metrics, fold aggregation,
//! cross-dataset harmonization, confusion matrices, and PCA export.

mod evaluate;
mod harmonize;
mod labels;
mod metrics;
mod pca;
mod report;
mod voting;

pub use evaluate::{
    clip_probabilities, cross_evaluate, evaluate_fold, pooled_clip_embeddings, CrossEvalOutcome,
    EvalSettings, FoldOutcome,
};
pub use harmonize::{harmonized_classes, HarmonizationMode, HarmonizedEval};
pub use labels::{LabelSet, CREMAD_LABELS, RAVDESS_LABELS};
pub use metrics::{uar, war, ConfusionMatrix, FoldMetrics, MetricsReport, UarResult};
pub use pca::pca2;
pub use report::{
    write_confusion_avg_csv, write_confusion_csv, write_confusion_svg, write_metrics_json,
    write_pca_csv,
};
pub use voting::{vote, vote_mv, vote_pbv, VideoPrediction, Voting};
