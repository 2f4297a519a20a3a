//! Experiment orchestration: configuration, the two task pipelines,
//! metrics and report emission.

pub mod config;
pub mod metrics;
mod pipeline;
pub mod pool;
pub mod records;
pub mod report;

pub use config::{DefenseKind, ExperimentConfig};
pub use pipeline::{
    label_name, load_or_calibrate, load_or_train_bnn, load_or_train_model, prepare, recompute_report, render_report,
    run_task1, run_task2, spread, task1_report, task2_report, Artifacts, CalibrationSummary,
};
pub use report::ExperimentReport;
