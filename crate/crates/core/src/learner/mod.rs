//! Built-in MC-dropout learner: a per-pixel linear softmax classifier over
//! six hand-built features, trained on partially labeled images with a mixed
//! cross-entropy and soft-dice loss.

mod features;
mod model;
mod train;

pub use features::{
    extract_features, gaussian_blur, gaussian_kernel, FeatureStats, PixelFeatures, FEATURE_COUNT,
    INPUT_COUNT,
};
pub use model::{LinearSoftmaxModel, DEFAULT_DROPOUT};
pub use train::{
    mixed_loss, mixed_loss_and_gradient, train, Batch, TrainConfig, TrainReport, TrainingImage,
};
