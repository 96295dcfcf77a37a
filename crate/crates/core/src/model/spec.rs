use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ConvParams, PoolParams};

/// What a layer computes, with its kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d(ConvParams),
    MaxPool(PoolParams),
    Dense { inputs: usize, units: usize },
    Relu,
    Softmax,
    Dropout { rate: f64 },
    /// Inference-mode batch normalization with running statistics.
    BatchNorm { channels: usize },
    Flatten,
    GlobalAvgPool,
    /// `relu(main(x) + shortcut(x))`; an empty shortcut is the identity.
    Residual {
        main: Vec<LayerSpec>,
        shortcut: Vec<LayerSpec>,
    },
}

/// Role of a stored tensor inside its layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// Multiplicative weights with their fan-in / fan-out.
    Weight { fan_in: usize, fan_out: usize },
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl ParamRole {
    /// Running statistics are buffers, never updated by an optimizer.
    pub fn is_learnable(self) -> bool {
        !matches!(self, ParamRole::RunningMean | ParamRole::RunningVar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub trainable: bool,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
            trainable: true,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Conv2d(_) => "conv2d",
            LayerKind::MaxPool(_) => "maxpool",
            LayerKind::Dense { .. } => "dense",
            LayerKind::Relu => "relu",
            LayerKind::Softmax => "softmax",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::BatchNorm { .. } => "batchnorm",
            LayerKind::Flatten => "flatten",
            LayerKind::GlobalAvgPool => "gap",
            LayerKind::Residual { .. } => "residual",
        }
    }

    /// Tensors owned directly by this layer, as `(suffix, dims, role)`.
    /// Residual blocks own nothing themselves.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>, ParamRole)> {
        match &self.kind {
            LayerKind::Conv2d(p) => {
                let mut v = vec![(
                    "weight",
                    p.weight_dims().to_vec(),
                    ParamRole::Weight {
                        fan_in: p.in_channels * p.kernel_h * p.kernel_w,
                        fan_out: p.out_channels * p.kernel_h * p.kernel_w,
                    },
                )];
                if p.bias {
                    v.push(("bias", vec![p.out_channels], ParamRole::Bias));
                }
                v
            }
            &LayerKind::Dense { inputs, units } => vec![
                (
                    "weight",
                    vec![units, inputs],
                    ParamRole::Weight {
                        fan_in: inputs,
                        fan_out: units,
                    },
                ),
                ("bias", vec![units], ParamRole::Bias),
            ],
            &LayerKind::BatchNorm { channels } => vec![
                ("gamma", vec![channels], ParamRole::Gamma),
                ("beta", vec![channels], ParamRole::Beta),
                ("running_mean", vec![channels], ParamRole::RunningMean),
                ("running_var", vec![channels], ParamRole::RunningVar),
            ],
            _ => Vec::new(),
        }
    }

    /// Output dims for the given input dims.
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        let spatial = |what: &str| -> Result<[usize; 3]> {
            match *input {
                [c, h, w] => Ok([c, h, w]),
                _ => Err(Error::shape(format!(
                    "layer {:?} ({what}) needs a [C, H, W] input, got {input:?}",
                    self.name
                ))),
            }
        };
        match &self.kind {
            LayerKind::Conv2d(p) => {
                let [c, h, w] = spatial("conv2d")?;
                if c != p.in_channels {
                    return Err(Error::shape(format!(
                        "layer {:?}: {c} input channels, conv expects {}",
                        self.name, p.in_channels
                    )));
                }
                let (oh, ow) = p.output_hw(h, w)?;
                Ok(vec![p.out_channels, oh, ow])
            }
            LayerKind::MaxPool(p) => {
                let [c, h, w] = spatial("maxpool")?;
                let (oh, ow) = p.output_hw(h, w)?;
                Ok(vec![c, oh, ow])
            }
            &LayerKind::Dense { inputs, units } => {
                if input.len() != 1 || input[0] != inputs {
                    return Err(Error::shape(format!(
                        "layer {:?}: dense expects [{inputs}], got {input:?}",
                        self.name
                    )));
                }
                Ok(vec![units])
            }
            LayerKind::Relu | LayerKind::Softmax => Ok(input.to_vec()),
            &LayerKind::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::config(format!(
                        "layer {:?}: dropout rate {rate} outside [0, 1)",
                        self.name
                    )));
                }
                Ok(input.to_vec())
            }
            &LayerKind::BatchNorm { channels } => {
                let [c, _, _] = spatial("batchnorm")?;
                if c != channels {
                    return Err(Error::shape(format!(
                        "layer {:?}: batchnorm over {channels} channels got {c}",
                        self.name
                    )));
                }
                Ok(input.to_vec())
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::GlobalAvgPool => {
                let [c, _, _] = spatial("gap")?;
                Ok(vec![c])
            }
            LayerKind::Residual { main, shortcut } => {
                let main_out = chain_dims(main, input)?;
                let short_out = chain_dims(shortcut, input)?;
                if main_out != short_out {
                    return Err(Error::shape(format!(
                        "residual {:?}: main branch gives {main_out:?}, shortcut gives {short_out:?}",
                        self.name
                    )));
                }
                Ok(main_out)
            }
        }
    }

    /// Calls `f` on this layer and, for residual blocks, every nested layer.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a LayerSpec)) {
        f(self);
        if let LayerKind::Residual { main, shortcut } = &self.kind {
            for l in main.iter().chain(shortcut) {
                l.visit(f);
            }
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut LayerSpec)) {
        f(self);
        if let LayerKind::Residual { main, shortcut } = &mut self.kind {
            for l in main.iter_mut().chain(shortcut.iter_mut()) {
                l.visit_mut(f);
            }
        }
    }

    /// True if this layer, or any layer nested in it, has trainable tensors.
    pub fn has_trainable_params(&self) -> bool {
        let mut any = false;
        self.visit(&mut |l| {
            any |= l.trainable && l.param_shapes().iter().any(|(_, _, r)| r.is_learnable())
        });
        any
    }
}

/// Runs shape inference through a layer sequence.
pub fn chain_dims(layers: &[LayerSpec], input: &[usize]) -> Result<Vec<usize>> {
    layers
        .iter()
        .try_fold(input.to_vec(), |dims, l| l.output_dims(&dims))
}
