use std::collections::HashSet;

use indexmap::IndexMap;

use super::spec::{chain_dims, LayerKind, LayerSpec, ParamRole};
use crate::error::{Error, Result};
use crate::tensor::{
    self, conv2d_backward_accumulate, dense_backward_accumulate, DropoutMode, RngState, Tensor, BN_EPS,
};

/// Named parameter tensors, in graph order.
pub type ParamMap = IndexMap<String, Tensor<f32>>;

/// Accumulated gradients for the trainable parameters of a graph.
pub type Gradients = IndexMap<String, Tensor<f32>>;

/// A sequential network with residual blocks and named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    name: String,
    input_dims: [usize; 3],
    layers: Vec<LayerSpec>,
    params: ParamMap,
}

/// Per-layer values saved by a training forward pass.
#[derive(Debug, Clone)]
enum Cache {
    Empty,
    Input(Tensor<f32>),
    Pool { argmax: Vec<usize>, in_dims: Vec<usize> },
    Softmax(Tensor<f32>),
    Dropout(Option<Vec<f32>>),
    Shape(Vec<usize>),
    Residual {
        main: Vec<Cache>,
        shortcut: Vec<Cache>,
        sum: Tensor<f32>,
    },
}

/// Output of [`ModelGraph::forward_train`], consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    output: Tensor<f32>,
}

impl Tape {
    pub fn output(&self) -> &Tensor<f32> {
        &self.output
    }
}

pub(crate) fn param_key(layer: &str, suffix: &str) -> String {
    format!("{layer}.{suffix}")
}

impl ModelGraph {
    /// Validates shapes and names and allocates parameters: weights and
    /// biases zero, batchnorm `gamma = 1, beta = 0, mean = 0, var = 1`.
    pub fn new(name: impl Into<String>, input_dims: [usize; 3], layers: Vec<LayerSpec>) -> Result<Self> {
        if input_dims.contains(&0) {
            return Err(Error::config(format!("input dims must be positive, got {input_dims:?}")));
        }
        chain_dims(&layers, &input_dims)?;
        let mut seen = HashSet::new();
        let mut params = ParamMap::new();
        for layer in &layers {
            let mut dup = None;
            layer.visit(&mut |l| {
                if !seen.insert(l.name.clone()) {
                    dup.get_or_insert_with(|| l.name.clone());
                }
                for (suffix, dims, role) in l.param_shapes() {
                    let fill = if matches!(role, ParamRole::Gamma | ParamRole::RunningVar) {
                        1.0
                    } else {
                        0.0
                    };
                    params.insert(param_key(&l.name, suffix), Tensor::full(&dims, fill));
                }
            });
            if let Some(name) = dup {
                return Err(Error::config(format!("duplicate layer name {name:?}")));
            }
        }
        Ok(ModelGraph {
            name: name.into(),
            input_dims,
            layers,
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input_dims
    }

    pub fn output_dims(&self) -> Vec<usize> {
        chain_dims(&self.layers, &self.input_dims).expect("validated at construction")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<&Tensor<f32>> {
        self.params.get(key)
    }

    /// Mutable access to one parameter; dims cannot change.
    pub fn param_mut(&mut self, key: &str) -> Option<&mut Tensor<f32>> {
        self.params.get_mut(key)
    }

    /// Replaces every parameter at once. Fails without modifying the model
    /// unless names, order and dims all agree.
    pub fn replace_params(&mut self, new: ParamMap) -> Result<()> {
        if new.len() != self.params.len() {
            return Err(Error::TensorCount {
                expected: self.params.len(),
                found: new.len(),
            });
        }
        for ((k, old), (nk, nt)) in self.params.iter().zip(&new) {
            if k != nk {
                return Err(Error::NameMismatch {
                    expected: k.clone(),
                    found: nk.clone(),
                });
            }
            if old.dims() != nt.dims() {
                return Err(Error::ShapeMismatch {
                    name: k.clone(),
                    expected: old.dims().to_vec(),
                    found: nt.dims().to_vec(),
                });
            }
        }
        self.params = new;
        Ok(())
    }

    /// Every leaf layer in execution order (residual blocks expanded).
    pub fn leaf_layers(&self) -> Vec<&LayerSpec> {
        let mut out = Vec::new();
        for l in &self.layers {
            l.visit(&mut |l| {
                if !matches!(l.kind, LayerKind::Residual { .. }) {
                    out.push(l)
                }
            });
        }
        out
    }

    /// Parameter keys that an optimizer may update.
    pub fn trainable_keys(&self) -> Vec<String> {
        let mut keys = Vec::new();
        for l in &self.layers {
            l.visit(&mut |l| {
                if l.trainable {
                    for (suffix, _, role) in l.param_shapes() {
                        if role.is_learnable() {
                            keys.push(param_key(&l.name, suffix));
                        }
                    }
                }
            });
        }
        keys
    }

    /// Conv: `kh*kw*cin*cout (+cout)`; dense: `in*out + out`; batchnorm:
    /// `2C` learnable plus `2C` running statistics that only count towards
    /// the total. Everything else contributes nothing.
    pub fn count_parameters(&self, trainable_only: bool) -> usize {
        let mut total = 0;
        for l in &self.layers {
            l.visit(&mut |l| {
                for (_, dims, role) in l.param_shapes() {
                    let n: usize = dims.iter().product();
                    if !trainable_only || (l.trainable && role.is_learnable()) {
                        total += n;
                    }
                }
            });
        }
        total
    }

    /// Sets `trainable = false` on every layer matching `predicate`; a
    /// matching residual block freezes everything nested in it.
    pub fn freeze_layers(&mut self, predicate: impl Fn(&LayerSpec) -> bool) {
        fn walk(layers: &mut [LayerSpec], pred: &dyn Fn(&LayerSpec) -> bool, force: bool) {
            for l in layers {
                let hit = force || pred(l);
                if hit {
                    l.trainable = false;
                }
                if let LayerKind::Residual { main, shortcut } = &mut l.kind {
                    walk(main, pred, hit);
                    walk(shortcut, pred, hit);
                }
            }
        }
        walk(&mut self.layers, &predicate, false);
    }

    pub fn unfreeze_all(&mut self) {
        for l in &mut self.layers {
            l.visit_mut(&mut |l| l.trainable = true);
        }
    }

    /// Zero-filled gradient accumulators for [`trainable_keys`](Self::trainable_keys).
    pub fn zero_gradients(&self) -> Gradients {
        self.trainable_keys()
            .into_iter()
            .map(|k| {
                let dims = self.params[&k].dims().to_vec();
                (k, Tensor::zeros(&dims))
            })
            .collect()
    }

    /// Inference-mode forward pass.
    pub fn forward(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        input.expect_dims(&self.input_dims, "model input")?;
        let mut rng = RngState::new(0);
        let mut x = input.clone();
        for l in &self.layers {
            x = self.layer_forward(l, x, DropoutMode::Infer, &mut rng, None)?;
        }
        Ok(x)
    }

    /// Forward pass that records what the backward pass needs. Dropout runs
    /// in `mode` and draws its masks from `rng`.
    pub fn forward_train(&self, input: &Tensor<f32>, mode: DropoutMode, rng: &mut RngState) -> Result<Tape> {
        input.expect_dims(&self.input_dims, "model input")?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for l in &self.layers {
            let mut cache = Cache::Empty;
            x = self.layer_forward(l, x, mode, rng, Some(&mut cache))?;
            caches.push(cache);
        }
        Ok(Tape { caches, output: x })
    }

    /// Backpropagates `grad_output` (gradient w.r.t. the model output) and
    /// adds parameter gradients into `grads`. Returns the input gradient.
    pub fn backward(&self, tape: &Tape, grad_output: &Tensor<f32>, grads: &mut Gradients) -> Result<Tensor<f32>> {
        grad_output.expect_dims(tape.output.dims(), "model grad_output")?;
        let gi = self.backward_layers(&self.layers, &tape.caches, grad_output.clone(), grads, true)?;
        Ok(gi.expect("input gradient requested"))
    }

    /// Backpropagates a gradient taken w.r.t. the logits feeding the terminal
    /// softmax (the fused softmax + cross-entropy path). Stops as soon as no
    /// earlier layer is trainable.
    pub fn backward_from_logits(&self, tape: &Tape, grad_logits: &Tensor<f32>, grads: &mut Gradients) -> Result<()> {
        let n = self.layers.len();
        if n == 0 || !matches!(self.layers[n - 1].kind, LayerKind::Softmax) {
            return Err(Error::config("backward_from_logits needs a terminal softmax layer"));
        }
        grad_logits.expect_dims(tape.output.dims(), "grad_logits")?;
        self.backward_layers(&self.layers[..n - 1], &tape.caches[..n - 1], grad_logits.clone(), grads, false)?;
        Ok(())
    }

    fn p(&self, layer: &LayerSpec, suffix: &str) -> &Tensor<f32> {
        &self.params[&param_key(&layer.name, suffix)]
    }

    fn layer_forward(
        &self,
        l: &LayerSpec,
        x: Tensor<f32>,
        mode: DropoutMode,
        rng: &mut RngState,
        cache: Option<&mut Cache>,
    ) -> Result<Tensor<f32>> {
        let record = cache.is_some();
        let (y, c) = match &l.kind {
            LayerKind::Conv2d(p) => {
                let bias = p.bias.then(|| self.p(l, "bias"));
                let y = tensor::conv2d_forward(&x, self.p(l, "weight"), bias, p)?;
                (y, record.then_some(Cache::Input(x)))
            }
            LayerKind::MaxPool(p) => {
                let pooled = tensor::maxpool2d(&x, p)?;
                let c = record.then(|| Cache::Pool {
                    argmax: pooled.argmax,
                    in_dims: x.dims().to_vec(),
                });
                (pooled.output, c)
            }
            LayerKind::Dense { .. } => {
                let y = tensor::dense_forward(&x, self.p(l, "weight"), self.p(l, "bias"))?;
                (y, record.then_some(Cache::Input(x)))
            }
            LayerKind::Relu => {
                let y = tensor::relu(&x);
                (y, record.then_some(Cache::Input(x)))
            }
            LayerKind::Softmax => {
                let y = tensor::softmax(&x);
                let c = record.then(|| Cache::Softmax(y.clone()));
                (y, c)
            }
            &LayerKind::Dropout { rate } => {
                let (y, mask) = tensor::dropout_with_mask(&x, rate, mode, rng)?;
                (y, record.then_some(Cache::Dropout(mask)))
            }
            LayerKind::BatchNorm { .. } => {
                let y = tensor::batchnorm_inference(
                    &x,
                    self.p(l, "gamma"),
                    self.p(l, "beta"),
                    self.p(l, "running_mean"),
                    self.p(l, "running_var"),
                    BN_EPS,
                )?;
                (y, record.then_some(Cache::Input(x)))
            }
            LayerKind::Flatten => {
                let y = tensor::flatten(&x);
                (y, record.then(|| Cache::Shape(x.dims().to_vec())))
            }
            LayerKind::GlobalAvgPool => {
                let y = tensor::global_average_pool(&x)?;
                (y, record.then(|| Cache::Shape(x.dims().to_vec())))
            }
            LayerKind::Residual { main, shortcut } => {
                let mut main_caches = Vec::new();
                let mut short_caches = Vec::new();
                let mut m = x.clone();
                for sub in main {
                    let mut c = Cache::Empty;
                    m = self.layer_forward(sub, m, mode, rng, record.then_some(&mut c))?;
                    main_caches.push(c);
                }
                let mut s = x;
                for sub in shortcut {
                    let mut c = Cache::Empty;
                    s = self.layer_forward(sub, s, mode, rng, record.then_some(&mut c))?;
                    short_caches.push(c);
                }
                m.add_assign(&s)?;
                let y = tensor::relu(&m);
                let c = record.then_some(Cache::Residual {
                    main: main_caches,
                    shortcut: short_caches,
                    sum: m,
                });
                (y, c)
            }
        };
        if let (Some(slot), Some(c)) = (cache, c) {
            *slot = c;
        }
        Ok(y)
    }

    fn backward_layers(
        &self,
        layers: &[LayerSpec],
        caches: &[Cache],
        mut grad: Tensor<f32>,
        grads: &mut Gradients,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<f32>>> {
        // need_before[i]: some layer in layers[..i] has trainable parameters.
        let mut need_before = vec![false; layers.len() + 1];
        for i in 0..layers.len() {
            need_before[i + 1] = need_before[i] || layers[i].has_trainable_params();
        }
        for i in (0..layers.len()).rev() {
            let need_input = want_input_grad || need_before[i];
            if !need_input && !layers[i].has_trainable_params() {
                return Ok(None);
            }
            match self.layer_backward(&layers[i], &caches[i], grad, grads, need_input)? {
                Some(g) => grad = g,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }

    fn layer_backward(
        &self,
        l: &LayerSpec,
        cache: &Cache,
        grad: Tensor<f32>,
        grads: &mut Gradients,
        need_input: bool,
    ) -> Result<Option<Tensor<f32>>> {
        let missing = || Error::config(format!("layer {:?}: missing forward cache", l.name));
        let gi = match (&l.kind, cache) {
            (LayerKind::Conv2d(p), Cache::Input(x)) => {
                let w = self.p(l, "weight");
                if l.trainable {
                    let wk = param_key(&l.name, "weight");
                    let bk = param_key(&l.name, "bias");
                    let [gw, gb] = grads.get_disjoint_mut([wk.as_str(), bk.as_str()]);
                    let gb = if p.bias { Some(gb.ok_or_else(missing)?) } else { None };
                    conv2d_backward_accumulate(&grad, x, w, p, gw.ok_or_else(missing)?, gb, need_input)?
                } else if need_input {
                    let mut scratch = Tensor::zeros(w.dims());
                    conv2d_backward_accumulate(&grad, x, w, p, &mut scratch, None, true)?
                } else {
                    None
                }
            }
            (LayerKind::Dense { .. }, Cache::Input(x)) => {
                let w = self.p(l, "weight");
                if l.trainable {
                    let wk = param_key(&l.name, "weight");
                    let bk = param_key(&l.name, "bias");
                    let [gw, gb] = grads.get_disjoint_mut([wk.as_str(), bk.as_str()]);
                    dense_backward_accumulate(&grad, x, w, gw.ok_or_else(missing)?, gb.ok_or_else(missing)?, need_input)?
                } else if need_input {
                    Some(tensor::dense_backward(&grad, x, w)?.input)
                } else {
                    None
                }
            }
            (LayerKind::MaxPool(_), Cache::Pool { argmax, in_dims }) => {
                Some(tensor::maxpool2d_backward(&grad, argmax, in_dims)?)
            }
            (LayerKind::Relu, Cache::Input(x)) => Some(tensor::relu_backward(&grad, x)?),
            (LayerKind::Softmax, Cache::Softmax(p)) => Some(tensor::softmax_backward(&grad, p)?),
            (LayerKind::Dropout { .. }, Cache::Dropout(mask)) => Some(match mask {
                None => grad,
                Some(m) => {
                    let data = grad.data().iter().zip(m).map(|(&g, &k)| g * k).collect();
                    Tensor::new(grad.dims(), data)?
                }
            }),
            (LayerKind::BatchNorm { .. }, Cache::Input(x)) => {
                let bn = tensor::batchnorm_inference_backward(
                    &grad,
                    x,
                    self.p(l, "gamma"),
                    self.p(l, "running_mean"),
                    self.p(l, "running_var"),
                    BN_EPS,
                )?;
                if l.trainable {
                    grads
                        .get_mut(&param_key(&l.name, "gamma"))
                        .ok_or_else(missing)?
                        .add_assign(&bn.gamma)?;
                    grads
                        .get_mut(&param_key(&l.name, "beta"))
                        .ok_or_else(missing)?
                        .add_assign(&bn.beta)?;
                }
                Some(bn.input)
            }
            (LayerKind::Flatten, Cache::Shape(dims)) => Some(grad.reshape(dims)?),
            (LayerKind::GlobalAvgPool, Cache::Shape(dims)) => {
                Some(tensor::global_average_pool_backward(&grad, dims)?)
            }
            (
                LayerKind::Residual { main, shortcut },
                Cache::Residual {
                    main: mc,
                    shortcut: sc,
                    sum,
                },
            ) => {
                let g = tensor::relu_backward(&grad, sum)?;
                let gm = self.backward_layers(main, mc, g.clone(), grads, need_input)?;
                let gs = self.backward_layers(shortcut, sc, g, grads, need_input)?;
                match (gm, gs) {
                    (Some(mut a), Some(b)) => {
                        a.add_assign(&b)?;
                        Some(a)
                    }
                    _ => None,
                }
            }
            _ => return Err(missing()),
        };
        Ok(if need_input { gi } else { None })
    }
}
