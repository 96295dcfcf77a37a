use serde::{Deserialize, Serialize};

use super::graph::{param_key, ModelGraph};
use super::spec::ParamRole;
use crate::tensor::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitKind {
    /// `N(0, 2 / (fan_in + fan_out))`
    GlorotNormal,
    /// `N(0, 2 / fan_in)`
    HeNormal,
}

impl InitKind {
    pub fn std(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitKind::GlorotNormal => (2.0 / (fan_in + fan_out) as f64).sqrt(),
            InitKind::HeNormal => (2.0 / fan_in as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitializerSpec {
    pub kind: InitKind,
    pub rng: RngState,
}

impl InitializerSpec {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        InitializerSpec {
            kind,
            rng: RngState::new(seed),
        }
    }
}

/// Draws every conv/dense weight from the spec's Gaussian and zeroes
/// biases. Batchnorm layers are reset to the identity transform.
///
/// Each tensor gets its own stream forked from the spec's seed by position,
/// so the result does not depend on tensor sizes elsewhere in the graph.
pub fn initialize(model: &mut ModelGraph, spec: &InitializerSpec) {
    let mut plan = Vec::new();
    for layer in model.layers() {
        layer.visit(&mut |l| {
            for (suffix, _, role) in l.param_shapes() {
                plan.push((param_key(&l.name, suffix), role));
            }
        });
    }
    for (stream, (key, role)) in plan.into_iter().enumerate() {
        let t = model.param_mut(&key).expect("parameter allocated at build");
        match role {
            ParamRole::Weight { fan_in, fan_out } => {
                let std = spec.kind.std(fan_in, fan_out);
                let mut rng = spec.rng.fork(stream as u64);
                for v in t.data_mut() {
                    *v = rng.normal(0.0, std) as f32;
                }
            }
            ParamRole::Bias | ParamRole::Beta | ParamRole::RunningMean => t.fill(0.0),
            ParamRole::Gamma | ParamRole::RunningVar => t.fill(1.0),
        }
    }
}
