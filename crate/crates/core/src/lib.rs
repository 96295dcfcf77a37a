//! A small CPU deep-learning engine and evaluation pipeline for
//! distracted-driver image classification.
//!
//! * [`tensor`]: dense tensors, layer kernels with backward passes, gradient checking.
//! * [`model`]: layer specs, sequential graphs, the CNN / VGG16 / ResNet50 builders,
//!   initializers and the `DDWT` weight container.
//! * [`data`]: manifests, driver-disjoint splits, image codecs, preprocessing,
//!   augmentation, average/difference images and a synthetic corpus.
//! * [`train`]: loss, optimizers, the training loop, metrics, latency and ensembles.

pub mod data;
pub mod error;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{RngState, Tensor};

/// Number of driver-action classes.
pub const NUM_CLASSES: usize = 10;
