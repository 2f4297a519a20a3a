//! Flipout variational layer, closed-form Gaussian KL, ELBO training and
//! Monte-Carlo prediction.

mod bnn;
mod variational;

pub(crate) use bnn::column_std;
pub use bnn::{
    bnn_accuracy, bnn_from_bytes, bnn_to_bytes, load_bnn, save_bnn, train_bnn, BnnClassifier, BnnTrainConfig,
    McPrediction,
};
pub use variational::{
    flipout_backward, flipout_forward, inverse_softplus, kl_gaussian, kl_gradient, sigmoid, softplus, FlipoutNoise,
    FlipoutOutput, VariationalDense,
};
