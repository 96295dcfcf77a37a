//! Dataset ingestion, splitting, image preprocessing, augmentation and EDA.

pub mod augment;
pub mod eda;
pub mod image;
pub mod manifest;
pub mod preprocess;
mod samples;
pub mod split;
pub mod synth;

pub use augment::{augment, AugmentPolicy, Transform};
pub use eda::{average_image, average_of, diff_image, DiffImage, FloatImage};
pub use image::{decode_image, encode_image, ImageBuffer};
pub use manifest::{load_labels, load_manifest, ClassLabel, DatasetIndex, DatasetRow};
pub use preprocess::{normalize, resize_bilinear, to_grayscale, Preprocess};
pub use samples::{load_samples, Sample, SplitRole};
pub use split::{split_by_driver, split_by_image, SplitPlan};
pub use synth::{synth_dataset, SynthConfig, SynthCorpus};
