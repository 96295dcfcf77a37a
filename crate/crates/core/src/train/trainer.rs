use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::{cross_entropy, cross_entropy_grad};
use super::optim::{OptimizerState, TrainConfig};
use crate::data::{normalize, AugmentPolicy, Sample, SplitRole};
use crate::error::{Error, Result};
use crate::model::ModelGraph;
use crate::tensor::{DropoutMode, RngState};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// `None` when there is no validation split.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_accuracy.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.train_accuracy, val).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Drivers present in both splits.
pub fn shared_drivers(train: &[Sample], val: &[Sample]) -> Vec<String> {
    let t: BTreeSet<&str> = train.iter().map(|s| s.driver.as_str()).collect();
    let v: BTreeSet<&str> = val.iter().map(|s| s.driver.as_str()).collect();
    t.intersection(&v).map(|d| d.to_string()).collect()
}

/// Fraction of `samples` whose inference-mode argmax matches the label.
pub fn accuracy(model: &ModelGraph, samples: &[Sample]) -> Result<f64> {
    let mut correct = 0usize;
    for s in samples {
        if model.forward(&normalize(&s.image))?.argmax() == s.label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len().max(1) as f64)
}

fn preflight(model: &ModelGraph, train: &[Sample], val: &[Sample], config: &TrainConfig, policy: &AugmentPolicy) -> Result<()> {
    config.validate()?;
    policy.validate()?;
    if train.is_empty() {
        return Err(Error::data("training split is empty"));
    }
    if config.batch_size > train.len() {
        return Err(Error::config(format!(
            "batch_size {} exceeds the {} training samples",
            config.batch_size,
            train.len()
        )));
    }
    if model.output_dims() != [NUM_CLASSES] {
        return Err(Error::config(format!(
            "model output {:?} is not a {NUM_CLASSES}-class vector",
            model.output_dims()
        )));
    }
    let [c, h, w] = model.input_dims();
    for s in train.iter().chain(val) {
        if (s.image.channels(), s.image.height(), s.image.width()) != (c, h, w) {
            return Err(Error::shape(format!(
                "sample is {}x{}x{}, model expects {c}x{h}x{w}",
                s.image.channels(),
                s.image.height(),
                s.image.width()
            )));
        }
    }
    if !config.allow_leaky_split {
        let shared = shared_drivers(train, val);
        if !shared.is_empty() {
            return Err(Error::config(format!(
                "drivers {shared:?} appear in both training and validation; splits must be driver-disjoint"
            )));
        }
    }
    Ok(())
}

/// Mini-batch training. Every check runs before the first update. Sample
/// order is reshuffled each epoch from `config.seed`; dropout and
/// augmentation draw from a separate stream of the same seed.
pub fn train(
    model: &mut ModelGraph,
    train: &[Sample],
    val: &[Sample],
    config: &TrainConfig,
    policy: &AugmentPolicy,
) -> Result<TrainHistory> {
    train_with(model, train, val, config, policy, |_| ControlFlow::Continue(()))
}

/// [`train`] with a callback after each epoch; `Break` stops training early.
pub fn train_with(
    model: &mut ModelGraph,
    train: &[Sample],
    val: &[Sample],
    config: &TrainConfig,
    policy: &AugmentPolicy,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<TrainHistory> {
    preflight(model, train, val, config, policy)?;
    let root = RngState::new(config.seed);
    let mut order_rng = root.fork(1);
    let mut noise_rng = root.fork(2);
    let mut opt = OptimizerState::new(model, config.optimizer, config.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        order_rng.shuffle(&mut order);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_gradients();
            for &i in batch {
                let s = &train[i];
                let x = s.to_input(SplitRole::Train, policy, &mut noise_rng);
                let tape = model.forward_train(&x, DropoutMode::Train, &mut noise_rng)?;
                let target = s.label.index();
                loss_sum += cross_entropy(tape.output(), target)?;
                if tape.output().argmax() == target {
                    correct += 1;
                }
                let g = cross_entropy_grad(tape.output(), target)?;
                model.backward_from_logits(&tape, &g, &mut grads)?;
            }
            let inv = 1.0 / batch.len() as f32;
            for g in grads.values_mut() {
                g.scale(inv);
            }
            opt.step(model, &grads)?;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_accuracy: if val.is_empty() { None } else { Some(accuracy(model, val)?) },
        };
        let flow = on_epoch(&record);
        history.epochs.push(record);
        if flow.is_break() {
            break;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassLabel, ImageBuffer};
    use crate::model::{build_model, initialize, InitializerSpec, LayerKind, LayerSpec, ModelConfig, ModelVariant};
    use crate::train::OptimizerKind;

    fn tiny_model(seed: u64) -> ModelGraph {
        let mut m = ModelGraph::new(
            "tiny",
            [1, 4, 4],
            vec![
                LayerSpec::new("flat", LayerKind::Flatten),
                LayerSpec::new("fc1", LayerKind::Dense { inputs: 16, units: 12 }),
                LayerSpec::new("relu", LayerKind::Relu),
                LayerSpec::new("drop", LayerKind::Dropout { rate: 0.25 }),
                LayerSpec::new("fc2", LayerKind::Dense { inputs: 12, units: 10 }),
                LayerSpec::new("softmax", LayerKind::Softmax),
            ],
        )
        .unwrap();
        initialize(&mut m, &InitializerSpec::new(crate::model::InitKind::GlorotNormal, seed));
        m
    }

    fn samples(drivers: &[&str], per: usize) -> Vec<Sample> {
        let mut out = Vec::new();
        for d in drivers {
            for k in 0..10 {
                for i in 0..per {
                    out.push(Sample {
                        image: ImageBuffer::from_fn(1, 4, 4, |_, y, x| {
                            if y * 4 + x == k + 3 {
                                250
                            } else {
                                (i * 7 + x * 3) as u8
                            }
                        }),
                        label: ClassLabel::new(k).unwrap(),
                        driver: d.to_string(),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn zero_learning_rate_is_noop() {
        let mut m = tiny_model(1);
        let before = m.params().clone();
        let mut cfg = TrainConfig::new(3, 8);
        cfg.learning_rate = 0.0;
        for opt in [OptimizerKind::Sgd, OptimizerKind::adam()] {
            cfg.optimizer = opt;
            let h = train(&mut m, &samples(&["a"], 2), &samples(&["b"], 1), &cfg, &AugmentPolicy::default()).unwrap();
            assert_eq!(h.len(), 3);
            assert_eq!(m.params(), &before);
        }
    }

    #[test]
    fn same_seed_same_history() {
        let cfg = TrainConfig {
            seed: 9,
            ..TrainConfig::new(4, 5)
        };
        let (tr, va) = (samples(&["a"], 2), samples(&["b"], 1));
        let run = || {
            let mut m = tiny_model(3);
            let h = train(&mut m, &tr, &va, &cfg, &AugmentPolicy::default()).unwrap();
            (h.to_csv(), m.params().clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn break_stops_after_that_epoch() {
        let cfg = TrainConfig::new(5, 5);
        let (tr, va) = (samples(&["a"], 2), samples(&["b"], 1));
        let policy = AugmentPolicy::default();
        let full = train(&mut tiny_model(6), &tr, &va, &cfg, &policy).unwrap();
        let mut seen = 0;
        let early = train_with(&mut tiny_model(6), &tr, &va, &cfg, &policy, |e| {
            seen += 1;
            if e.epoch == 2 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!((seen, early.len()), (2, 2));
        assert_eq!(early.epochs[..], full.epochs[..2]);
    }

    #[test]
    fn learns_separable_toy_problem() {
        let mut m = tiny_model(4);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::new(60, 10)
        };
        let h = train(&mut m, &samples(&["a", "b"], 2), &samples(&["c"], 1), &cfg, &AugmentPolicy::disabled()).unwrap();
        assert_eq!(h.last().unwrap().val_accuracy, Some(1.0));
        assert!(h.epochs[0].train_loss > h.last().unwrap().train_loss);
    }

    #[test]
    fn preflight_rejects_before_training() {
        let mut m = tiny_model(5);
        let before = m.params().clone();
        let tr = samples(&["a", "b"], 1);
        let cfg = TrainConfig::new(1, 4);
        let policy = AugmentPolicy::disabled();
        let err = train(&mut m, &tr, &samples(&["b"], 1), &cfg, &policy).unwrap_err();
        assert!(err.to_string().contains("driver-disjoint"), "{err}");
        let leaky = TrainConfig {
            allow_leaky_split: true,
            ..cfg.clone()
        };
        assert!(train(&mut m, &tr, &samples(&["b"], 1), &leaky, &policy).is_ok());
        let mut m = tiny_model(5);
        assert!(train(&mut m, &tr, &[], &TrainConfig::new(1, 1000), &policy).is_err());
        assert!(train(&mut m, &[], &[], &cfg, &policy).is_err());
        assert_eq!(m.params(), &before);

        let mut cnn = build_model(ModelVariant::Cnn, &ModelConfig::default_for(ModelVariant::Cnn)).unwrap();
        assert!(train(&mut cnn, &tr, &[], &cfg, &policy).is_err());
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 2.5,
                    train_accuracy: 0.25,
                    val_accuracy: Some(0.5),
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 1.0,
                    train_accuracy: 0.75,
                    val_accuracy: None,
                },
            ],
        };
        assert_eq!(h.to_csv(), "epoch,train_loss,train_acc,val_acc\n1,2.5,0.25,0.5\n2,1,0.75,\n");
    }
}
