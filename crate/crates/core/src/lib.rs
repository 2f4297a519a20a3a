//! Black-box adversarial robustness toolkit for small audio classifiers.
//!
//! The crate bundles everything needed to run a query-only attack/defense
//! study end to end on a single machine:
//!
//! - [`dsp`]: WAV I/O, FFT, log-mel and MFCC features, SNR scaling and the
//!   two preprocessing defenses (local smoothing, downsampling).
//! - [`dataset`]: a deterministic synthetic spoken-command corpus.
//! - [`nn`]: a minimal reverse-mode network toolkit and the acoustic classifier.
//! - [`bayes`]: the Flipout variational layer, Gaussian KL, ELBO training and
//!   Monte-Carlo prediction.
//! - [`attack`]: budgeted query oracles plus evolutionary, zeroth-order and
//!   Gaussian-noise perturbations.
//! - [`detect`]: Wasserstein distances, the BNN dispersion detector, the
//!   temporal-dependency detector and defense wrappers.
//! - [`harness`]: experiment configuration, metrics and the two task pipelines.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod attack;
pub mod bayes;
pub mod dataset;
pub mod detect;
pub mod dsp;
mod error;
pub mod harness;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
