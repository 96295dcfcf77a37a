use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelGraph};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::adam()),
            _ => Err(Error::config(format!("unknown optimizer {s:?} (expected sgd or adam)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Permit drivers shared between training and validation. Only for
    /// demonstrating identity leakage.
    pub allow_leaky_split: bool,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize) -> Self {
        TrainConfig {
            epochs,
            batch_size,
            learning_rate: 0.001,
            optimizer: OptimizerKind::adam(),
            seed: 0,
            allow_leaky_split: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        // lr = 0 is accepted: it is the documented no-op configuration.
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let ok = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0;
            if !ok {
                return Err(Error::config(format!("invalid adam settings {:?}", self.optimizer)));
            }
        }
        Ok(())
    }
}

/// Moment buffers for the trainable parameters of one model.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    m: IndexMap<String, Vec<f64>>,
    v: IndexMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn new(model: &ModelGraph, kind: OptimizerKind, learning_rate: f64) -> Self {
        let (mut m, mut v) = (IndexMap::new(), IndexMap::new());
        if let OptimizerKind::Adam { .. } = kind {
            for k in model.trainable_keys() {
                let n = model.params()[&k].len();
                m.insert(k.clone(), vec![0.0; n]);
                v.insert(k, vec![0.0; n]);
            }
        }
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            m,
            v,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `grads` may only name trainable parameters; frozen
    /// ones are never touched. Everything is checked before anything moves.
    pub fn step(&mut self, model: &mut ModelGraph, grads: &Gradients) -> Result<()> {
        let trainable = model.trainable_keys();
        for (k, g) in grads {
            if !trainable.contains(k) {
                return Err(Error::config(format!("gradient for non-trainable parameter {k}")));
            }
            g.expect_dims(model.params()[k].dims(), k)?;
        }
        self.step += 1;
        let lr = self.learning_rate;
        for (k, g) in grads {
            let p = model.param_mut(k).expect("checked above");
            match self.kind {
                OptimizerKind::Sgd => sgd(p, g, lr),
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let m = self.m.get_mut(k).expect("trainable key");
                    let v = self.v.get_mut(k).expect("trainable key");
                    let c1 = 1.0 - beta1.powf(self.step as f64);
                    let c2 = 1.0 - beta2.powf(self.step as f64);
                    for (i, (pv, gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        let gv = *gv as f64;
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gv;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gv * gv;
                        let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                        *pv = (*pv as f64 - update) as f32;
                    }
                }
            }
        }
        Ok(())
    }
}

fn sgd(p: &mut Tensor<f32>, g: &Tensor<f32>, lr: f64) {
    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
        *pv = (*pv as f64 - lr * *gv as f64) as f32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerSpec;
    use crate::model::LayerKind;

    fn toy() -> ModelGraph {
        let mut m = ModelGraph::new(
            "toy",
            [1, 1, 2],
            vec![
                LayerSpec::new("flat", LayerKind::Flatten),
                LayerSpec::new("fc", LayerKind::Dense { inputs: 2, units: 1 }),
            ],
        )
        .unwrap();
        m.param_mut("fc.weight").unwrap().fill(1.0);
        m
    }

    fn grads(m: &ModelGraph, w: f32, b: f32) -> Gradients {
        let mut g = m.zero_gradients();
        g["fc.weight"].fill(w);
        g["fc.bias"].fill(b);
        g
    }

    #[test]
    fn sgd_hand_value_and_zero_gradient() {
        let mut m = toy();
        let mut opt = OptimizerState::new(&m, OptimizerKind::Sgd, 0.001);
        opt.step(&mut m, &grads(&toy(), 2.0, 0.0)).unwrap();
        assert_eq!(m.param("fc.weight").unwrap().data(), &[0.998f32, 0.998]);
        let before = m.params().clone();
        opt.step(&mut m, &grads(&toy(), 0.0, 0.0)).unwrap();
        assert_eq!(m.params(), &before);
    }

    #[test]
    fn adam_first_step_with_zero_gradient_is_noop() {
        let mut m = toy();
        let before = m.params().clone();
        let mut opt = OptimizerState::new(&m, OptimizerKind::adam(), 0.001);
        opt.step(&mut m, &grads(&toy(), 0.0, 0.0)).unwrap();
        assert_eq!(m.params(), &before);
    }

    #[test]
    fn adam_matches_closed_form_on_quadratic() {
        // f(w) = (w - 3)^2 / 2, gradient w - 3. Oracle runs the textbook
        // recurrences independently in f64.
        let mut m = toy();
        let mut opt = OptimizerState::new(&m, OptimizerKind::adam(), 0.1);
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
        let (mut w, mut mm, mut vv) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=5 {
            let gw = m.param("fc.weight").unwrap().data()[0] - 3.0;
            opt.step(&mut m, &grads(&toy(), gw, 0.0)).unwrap();
            let g = w - 3.0;
            mm = b1 * mm + (1.0 - b1) * g;
            vv = b2 * vv + (1.0 - b2) * g * g;
            let mh = mm / (1.0 - b1.powi(t));
            let vh = vv / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
            w = w as f32 as f64;
            assert_eq!(m.param("fc.weight").unwrap().data()[0] as f64, w, "step {t}");
        }
        // The first Adam step moves by ~lr regardless of gradient scale.
        assert!((m.param("fc.weight").unwrap().data()[0] - 1.0) > 0.45);
    }

    #[test]
    fn frozen_and_mismatched_gradients_rejected() {
        let mut m = toy();
        let mut opt = OptimizerState::new(&m, OptimizerKind::Sgd, 0.1);
        let mut g = grads(&toy(), 1.0, 1.0);
        g.insert("fc.weight".into(), Tensor::zeros(&[3]));
        assert!(opt.step(&mut m, &g).is_err());
        m.freeze_layers(|_| true);
        assert!(opt.step(&mut m, &grads(&toy(), 1.0, 1.0)).is_err());
        assert_eq!(m.param("fc.weight").unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::new(1, 1).validate().is_ok());
        assert!(TrainConfig::new(0, 1).validate().is_err());
        let mut c = TrainConfig::new(1, 1);
        c.learning_rate = -1.0;
        assert!(c.validate().is_err());
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::adam());
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
