//! Confusion matrices, macro-averaged scores and multi-run summaries.

mod confusion;
mod scores;

pub use confusion::{confusion, ConfusionMatrix};
pub use scores::{
    aggregate_runs, metrics_from_confusion, render_csv, render_markdown, Metrics, MetricsReport,
    Summary,
};
