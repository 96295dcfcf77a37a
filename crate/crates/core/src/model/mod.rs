//! Layer catalog, sequential graphs, initializers, architectures and
//! weight persistence.

mod graph;
mod init;
mod spec;
pub mod weights;
pub mod zoo;

pub use graph::{Gradients, ModelGraph, ParamMap, Tape};
pub use init::{initialize, InitKind, InitializerSpec};
pub use spec::{chain_dims, LayerKind, LayerSpec, ParamRole};
pub use weights::{load_weights, save_weights};
pub use zoo::{
    build_model, build_cnn, build_resnet50, build_vgg16, layer_tally, CnnVariant, HeadPooling,
    ModelConfig, ModelVariant, VggHead,
};
