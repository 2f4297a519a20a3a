//! Minimal differentiable network toolkit and the acoustic classifier.
//!
//! Layers are evaluated on an activation tape and differentiated in reverse
//! order; parameters live in one flat vector with per-layer views.

pub mod checkpoint;
pub(crate) mod layers;
mod model;
mod optim;
mod tensor;
mod train;

pub use layers::{softmax, softmax_cross_entropy, LayerSpec, Sequential, Tape};
pub use model::{argmax, ClassifierModel, Frontend, ModelConfig};
pub use optim::{Adam, AdamConfig, TrainState};
pub use tensor::Tensor;
pub(crate) use train::augment_clip;
pub use train::{
    accuracy, evaluate_features, features_for, train, train_on, write_curve_csv, EpochStats, LabeledFeatures,
    NoiseAugment, TrainConfig,
};
