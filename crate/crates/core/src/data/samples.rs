use std::path::Path;

use super::augment::{augment, AugmentPolicy};
use super::image::ImageBuffer;
use super::manifest::{ClassLabel, DatasetIndex};
use super::preprocess::{normalize, Preprocess};
use super::synth::SynthCorpus;
use crate::error::Result;
use crate::tensor::{RngState, Tensor};

/// A preprocessed image with its label and driver.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageBuffer,
    pub label: ClassLabel,
    pub driver: String,
}

/// What a batch is for. Only training batches are ever augmented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRole {
    Train,
    Validation,
    Production,
}

impl Sample {
    /// Model input for this sample. Augmentation runs only for
    /// [`SplitRole::Train`]; other roles get the untouched image whatever
    /// the policy says.
    pub fn to_input(&self, role: SplitRole, policy: &AugmentPolicy, rng: &mut RngState) -> Tensor<f32> {
        match role {
            SplitRole::Train if policy.enabled => normalize(&augment(&self.image, policy, rng)),
            _ => normalize(&self.image),
        }
    }
}

/// Reads and preprocesses every row of `index` from `root`.
pub fn load_samples(index: &DatasetIndex, root: &Path, preprocess: &Preprocess) -> Result<Vec<Sample>> {
    index
        .rows()
        .iter()
        .map(|r| {
            Ok(Sample {
                image: preprocess.load(root.join(&r.path))?,
                label: r.label,
                driver: r.driver.clone(),
            })
        })
        .collect()
}

impl SynthCorpus {
    /// Preprocessed in-memory samples for the rows of `subset` (which must
    /// come from this corpus's index).
    pub fn samples(&self, subset: &DatasetIndex, preprocess: &Preprocess) -> Result<Vec<Sample>> {
        let lookup: std::collections::HashMap<_, _> = self
            .index
            .rows()
            .iter()
            .zip(&self.images)
            .map(|(r, img)| (&r.img, img))
            .collect();
        subset
            .rows()
            .iter()
            .map(|r| {
                let img = lookup.get(&r.img).ok_or_else(|| {
                    crate::Error::data(format!("{} is not part of the synthetic corpus", r.img))
                })?;
                Ok(Sample {
                    image: preprocess.apply(img)?,
                    label: r.label,
                    driver: r.driver.clone(),
                })
            })
            .collect()
    }
}
