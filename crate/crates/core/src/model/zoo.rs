//! Builders for the five architectures compared in the benchmark.
//!
//! | variant      | body                                          | head                                   | init    |
//! |--------------|-----------------------------------------------|----------------------------------------|---------|
//! | `cnn`        | 4 x (conv3x3-relu-pool2x2), dropout           | dense-relu-dropout, dense(10), softmax  | glorot  |
//! | `cnn-opt`    | 3 x (conv3x3-relu-pool2x2), conv3x3-relu      | dense-relu-dropout, dense(10), softmax  | he      |
//! | `vgg16`      | frozen VGG16-D, 13 conv / 5 pool              | gap, dense(10), softmax                | glorot  |
//! | `vgg16-opt`  | frozen VGG16-D                                | gap/flatten, dense-relu-dropout, dense(10), softmax | glorot |
//! | `resnet50`   | frozen bottleneck ResNet-50, batchnorm        | gap, dense(10), softmax                | he      |
//!
//! All hidden activations are ReLU.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::ModelGraph;
use super::init::{initialize, InitKind, InitializerSpec};
use super::spec::{chain_dims, LayerKind, LayerSpec};
use crate::error::{Error, Result};
use crate::tensor::{ConvParams, PoolParams};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    Cnn,
    CnnOptimized,
    Vgg16,
    Vgg16Optimized,
    ResNet50,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Cnn,
        ModelVariant::CnnOptimized,
        ModelVariant::Vgg16,
        ModelVariant::Vgg16Optimized,
        ModelVariant::ResNet50,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Cnn => "cnn",
            ModelVariant::CnnOptimized => "cnn-opt",
            ModelVariant::Vgg16 => "vgg16",
            ModelVariant::Vgg16Optimized => "vgg16-opt",
            ModelVariant::ResNet50 => "resnet50",
        }
    }

    /// Kernel initializer listed for the variant; ResNet50 has none listed
    /// and uses He.
    pub fn initializer(self) -> InitKind {
        match self {
            ModelVariant::CnnOptimized | ModelVariant::ResNet50 => InitKind::HeNormal,
            _ => InitKind::GlorotNormal,
        }
    }

    /// `(epochs, batch size)` defaults per variant.
    pub fn default_schedule(self) -> (usize, usize) {
        match self {
            ModelVariant::Cnn | ModelVariant::CnnOptimized => (25, 40),
            ModelVariant::Vgg16 | ModelVariant::ResNet50 => (400, 16),
            ModelVariant::Vgg16Optimized => (75, 16),
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown model {s:?} (expected cnn, cnn-opt, vgg16, vgg16-opt or resnet50)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadPooling {
    Gap,
    Flatten,
}

/// Everything the builders need; unused fields are ignored by a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    /// Filters of the four CNN conv layers.
    pub conv_widths: [usize; 4],
    /// Hidden units of the first CNN dense layer.
    pub dense_units: usize,
    /// Hidden units of the optimized VGG16 head.
    pub vgg_hidden: usize,
    pub vgg_head_pooling: HeadPooling,
    pub seed: u64,
}

impl ModelConfig {
    /// 64x64 grayscale for the CNNs, 224x224 RGB for the pretrained backbones.
    pub fn default_for(variant: ModelVariant) -> Self {
        let (channels, side) = match variant {
            ModelVariant::Cnn | ModelVariant::CnnOptimized => (1, 64),
            _ => (3, 224),
        };
        ModelConfig {
            channels,
            height: side,
            width: side,
            conv_widths: [32, 64, 128, 256],
            dense_units: 512,
            vgg_hidden: 256,
            vgg_head_pooling: HeadPooling::Gap,
            seed: 0,
        }
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CnnVariant {
    Base,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VggHead {
    LinearProbe,
    OptimizedHead,
}

pub fn build_model(variant: ModelVariant, config: &ModelConfig) -> Result<ModelGraph> {
    match variant {
        ModelVariant::Cnn => build_cnn(CnnVariant::Base, config),
        ModelVariant::CnnOptimized => build_cnn(CnnVariant::Optimized, config),
        ModelVariant::Vgg16 => build_vgg16(VggHead::LinearProbe, config),
        ModelVariant::Vgg16Optimized => build_vgg16(VggHead::OptimizedHead, config),
        ModelVariant::ResNet50 => build_resnet50(config),
    }
}

/// Appends layers while tracking the running output dims.
struct Stack {
    dims: Vec<usize>,
    layers: Vec<LayerSpec>,
}

impl Stack {
    fn new(input: [usize; 3]) -> Self {
        Stack {
            dims: input.to_vec(),
            layers: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, kind: LayerKind) -> Result<()> {
        let layer = LayerSpec::new(name, kind);
        self.dims = layer.output_dims(&self.dims)?;
        self.layers.push(layer);
        Ok(())
    }

    fn channels(&self) -> usize {
        self.dims[0]
    }

    fn conv(&mut self, name: String, kernel: usize, out: usize) -> Result<()> {
        let cin = self.channels();
        self.push(name, LayerKind::Conv2d(ConvParams::same(kernel, cin, out)))
    }

    /// 2x2 stride-2 pool; refuses to pool a map that is already 1 pixel wide.
    fn pool(&mut self, name: String) -> Result<()> {
        if self.dims.len() != 3 || self.dims[1] < 2 || self.dims[2] < 2 {
            return Err(Error::config(format!(
                "{name}: feature map {:?} is too small to pool; increase the input resolution",
                self.dims
            )));
        }
        self.push(name, LayerKind::MaxPool(PoolParams::two_by_two()))
    }

    fn dense(&mut self, name: String, units: usize) -> Result<()> {
        let inputs = self.dims.iter().product();
        self.push(name, LayerKind::Dense { inputs, units })
    }

    fn finish(self, name: &str, input: [usize; 3]) -> Result<ModelGraph> {
        ModelGraph::new(name, input, self.layers)
    }
}

fn check_positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(format!("{what} must be positive")));
    }
    Ok(())
}

/// Four 3x3 conv layers with ReLU, 2x2 pools, two dense layers and a
/// softmax. The base variant pools after every conv and has two dropouts;
/// the optimized variant skips the last pool and keeps one dropout.
pub fn build_cnn(variant: CnnVariant, config: &ModelConfig) -> Result<ModelGraph> {
    for (i, &w) in config.conv_widths.iter().enumerate() {
        check_positive(&format!("conv width {}", i + 1), w)?;
    }
    check_positive("dense units", config.dense_units)?;
    let input = config.input_dims();
    let mut s = Stack::new(input);
    let pools = match variant {
        CnnVariant::Base => 4,
        CnnVariant::Optimized => 3,
    };
    for (i, &width) in config.conv_widths.iter().enumerate() {
        let n = i + 1;
        s.conv(format!("conv{n}"), 3, width)?;
        s.push(format!("relu{n}"), LayerKind::Relu)?;
        if i < pools {
            s.pool(format!("pool{n}"))?;
        }
    }
    let mut dropouts = 0;
    let mut dropout = |s: &mut Stack| {
        dropouts += 1;
        s.push(format!("dropout{dropouts}"), LayerKind::Dropout { rate: 0.5 })
    };
    if variant == CnnVariant::Base {
        dropout(&mut s)?;
    }
    s.push("flatten", LayerKind::Flatten)?;
    s.dense("dense1".into(), config.dense_units)?;
    s.push("relu_dense1", LayerKind::Relu)?;
    dropout(&mut s)?;
    s.dense("dense2".into(), NUM_CLASSES)?;
    s.push("softmax", LayerKind::Softmax)?;

    let name = match variant {
        CnnVariant::Base => ModelVariant::Cnn,
        CnnVariant::Optimized => ModelVariant::CnnOptimized,
    };
    let mut model = s.finish(name.as_str(), input)?;
    initialize(&mut model, &InitializerSpec::new(name.initializer(), config.seed));
    Ok(model)
}

/// Filters of VGG16 configuration D; 0 marks a 2x2 max pool.
pub const VGG16_D: [usize; 18] = [64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0];

fn vgg16_backbone(s: &mut Stack) -> Result<()> {
    let (mut block, mut conv) = (1, 1);
    for &width in &VGG16_D {
        if width == 0 {
            s.pool(format!("block{block}_pool"))?;
            block += 1;
            conv = 1;
        } else {
            s.conv(format!("block{block}_conv{conv}"), 3, width)?;
            s.push(format!("block{block}_relu{conv}"), LayerKind::Relu)?;
            conv += 1;
        }
    }
    Ok(())
}

/// Frozen VGG16-D backbone with a trainable head.
pub fn build_vgg16(head: VggHead, config: &ModelConfig) -> Result<ModelGraph> {
    if !config.height.is_multiple_of(32) || !config.width.is_multiple_of(32) {
        return Err(Error::config(format!(
            "VGG16 input must be divisible by 32, got {}x{}",
            config.height, config.width
        )));
    }
    let input = config.input_dims();
    let mut s = Stack::new(input);
    vgg16_backbone(&mut s)?;
    let backbone_len = s.layers.len();
    match head {
        VggHead::LinearProbe => {
            s.push("gap", LayerKind::GlobalAvgPool)?;
        }
        VggHead::OptimizedHead => {
            check_positive("vgg hidden units", config.vgg_hidden)?;
            match config.vgg_head_pooling {
                HeadPooling::Gap => s.push("gap", LayerKind::GlobalAvgPool)?,
                HeadPooling::Flatten => s.push("flatten", LayerKind::Flatten)?,
            }
            s.dense("fc1".into(), config.vgg_hidden)?;
            s.push("fc1_relu", LayerKind::Relu)?;
            s.push("dropout1", LayerKind::Dropout { rate: 0.5 })?;
        }
    }
    s.dense("predictions".into(), NUM_CLASSES)?;
    s.push("softmax", LayerKind::Softmax)?;
    let variant = match head {
        VggHead::LinearProbe => ModelVariant::Vgg16,
        VggHead::OptimizedHead => ModelVariant::Vgg16Optimized,
    };
    let mut model = s.finish(variant.as_str(), input)?;
    initialize(&mut model, &InitializerSpec::new(variant.initializer(), config.seed));
    let frozen: Vec<String> = model.layers()[..backbone_len].iter().map(|l| l.name.clone()).collect();
    model.freeze_layers(|l| frozen.contains(&l.name));
    Ok(model)
}

fn conv_bn(
    prefix: &str,
    suffix: &str,
    kernel: usize,
    cin: usize,
    cout: usize,
    stride: usize,
    relu: bool,
) -> Vec<LayerSpec> {
    let conv = ConvParams::new(kernel, cin, cout, stride, kernel / 2).without_bias();
    let mut v = vec![
        LayerSpec::new(format!("{prefix}.conv{suffix}"), LayerKind::Conv2d(conv)),
        LayerSpec::new(format!("{prefix}.bn{suffix}"), LayerKind::BatchNorm { channels: cout }),
    ];
    if relu {
        v.push(LayerSpec::new(format!("{prefix}.relu{suffix}"), LayerKind::Relu));
    }
    v
}

/// One bottleneck block `1x1 -> 3x3 (stride) -> 1x1 (x4)` with a projection
/// shortcut when the shape changes.
pub fn bottleneck(name: &str, cin: usize, width: usize, stride: usize) -> LayerSpec {
    let cout = 4 * width;
    let mut main = conv_bn(name, "1", 1, cin, width, 1, true);
    main.extend(conv_bn(name, "2", 3, width, width, stride, true));
    main.extend(conv_bn(name, "3", 1, width, cout, 1, false));
    let shortcut = if stride != 1 || cin != cout {
        let proj = ConvParams::new(1, cin, cout, stride, 0).without_bias();
        vec![
            LayerSpec::new(format!("{name}.downsample.conv"), LayerKind::Conv2d(proj)),
            LayerSpec::new(format!("{name}.downsample.bn"), LayerKind::BatchNorm { channels: cout }),
        ]
    } else {
        Vec::new()
    };
    LayerSpec::new(name, LayerKind::Residual { main, shortcut })
}

/// Stages of ResNet-50 as `(blocks, width, first stride)`.
pub const RESNET50_STAGES: [(usize, usize, usize); 4] = [(3, 64, 1), (4, 128, 2), (6, 256, 2), (3, 512, 2)];

/// Frozen 50-layer bottleneck ResNet (batchnorm in inference mode) with a
/// trainable `gap -> dense(10) -> softmax` head.
pub fn build_resnet50(config: &ModelConfig) -> Result<ModelGraph> {
    if config.height < 32 || config.width < 32 {
        return Err(Error::config(format!(
            "ResNet50 input must be at least 32x32, got {}x{}",
            config.height, config.width
        )));
    }
    let input = config.input_dims();
    let mut layers = conv_bn("stem", "1", 7, config.channels, 64, 2, true);
    // The stem conv is 7x7 / 2 with padding 3.
    if let LayerKind::Conv2d(p) = &mut layers[0].kind {
        p.padding = 3;
    }
    layers.push(LayerSpec::new("stem.pool", LayerKind::MaxPool(PoolParams::new(3, 2, 1))));
    let mut cin = 64;
    for (stage, &(blocks, width, stride)) in RESNET50_STAGES.iter().enumerate() {
        for b in 0..blocks {
            let s = if b == 0 { stride } else { 1 };
            layers.push(bottleneck(&format!("layer{}.{b}", stage + 1), cin, width, s));
            cin = 4 * width;
        }
    }
    let backbone_len = layers.len();
    let feature_dims = chain_dims(&layers, &input)?;
    layers.push(LayerSpec::new("gap", LayerKind::GlobalAvgPool));
    layers.push(LayerSpec::new(
        "fc",
        LayerKind::Dense {
            inputs: feature_dims[0],
            units: NUM_CLASSES,
        },
    ));
    layers.push(LayerSpec::new("softmax", LayerKind::Softmax));
    let mut model = ModelGraph::new(ModelVariant::ResNet50.as_str(), input, layers)?;
    initialize(
        &mut model,
        &InitializerSpec::new(ModelVariant::ResNet50.initializer(), config.seed),
    );
    let frozen: Vec<String> = model.layers()[..backbone_len].iter().map(|l| l.name.clone()).collect();
    model.freeze_layers(|l| frozen.contains(&l.name));
    Ok(model)
}

/// Number of leaf layers of each kind, in first-seen order.
pub fn layer_tally(model: &ModelGraph) -> Vec<(&'static str, usize)> {
    let mut tally: Vec<(&'static str, usize)> = Vec::new();
    for l in model.leaf_layers() {
        let k = l.kind_name();
        match tally.iter_mut().find(|(name, _)| *name == k) {
            Some((_, n)) => *n += 1,
            None => tally.push((k, 1)),
        }
    }
    tally
}
