//! Adversarial detection and input defenses.

mod defense;
mod detector;
mod td;
mod wasserstein;

pub use defense::{defense_wrap, BnnOracle, Defended, Defense, GuardedBnn, GuardedTd};
pub use detector::{
    bnn_statistic, calibrate, detect, score_prediction, write_detection_csv, write_hidden_std_csv,
    CalibrationReference, DetectionScore, DetectorConfig, Statistic, StatisticSample,
};
pub use td::{td_detector, total_variation, TD_SEGMENTS};
pub use wasserstein::{sliced_wasserstein, wasserstein_1d, EmpiricalDist, QUANTILES, SLICES};
