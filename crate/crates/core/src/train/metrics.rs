use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::latency::LatencyStats;
use crate::data::{ClassLabel, Sample};
use crate::error::{Error, Result};
use crate::model::ModelGraph;
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

/// `K x K` counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        assert!(truth < self.classes && predicted < self.classes, "class out of range");
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|j| self.get(k, j)).sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, k)).sum()
    }

    /// correct / total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    /// Recall of each class (diagonal over row sum); 0 for a class with no
    /// samples.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        (0..self.classes).map(|k| ratio(self.get(k, k), self.row_sum(k))).collect()
    }

    /// `2PR / (P + R)` per class; 0 when the class was never predicted
    /// correctly (which covers empty classes).
    pub fn f1_scores(&self) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                let tp = self.get(k, k);
                if tp == 0 {
                    return 0.0;
                }
                let p = ratio(tp, self.col_sum(k));
                let r = ratio(tp, self.row_sum(k));
                2.0 * p * r / (p + r)
            })
            .collect()
    }

    pub fn macro_f1(&self) -> f64 {
        let f1 = self.f1_scores();
        if f1.is_empty() {
            return 0.0;
        }
        f1.iter().sum::<f64>() / f1.len() as f64
    }

    /// CSV with a `true\pred` corner cell and class names on both axes.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("true\\pred");
        for n in names {
            write!(out, ",{n}").unwrap();
        }
        out.push('\n');
        for (i, row) in self.rows().iter().enumerate() {
            out.push_str(&names[i]);
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub support: u64,
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: u64,
    pub overall_accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    pub confusion: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency: Option<LatencyStats>,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let acc = confusion.per_class_accuracy();
        let f1 = confusion.f1_scores();
        let per_class = (0..confusion.classes())
            .map(|k| ClassScore {
                class: class_name(k),
                support: confusion.row_sum(k),
                accuracy: acc[k],
                f1: f1[k],
            })
            .collect();
        EvalReport {
            samples: confusion.total(),
            overall_accuracy: confusion.accuracy(),
            macro_f1: confusion.macro_f1(),
            per_class,
            confusion,
            latency: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn confusion_csv(&self) -> String {
        let names: Vec<String> = self.per_class.iter().map(|c| c.class.clone()).collect();
        self.confusion.to_csv(&names)
    }

    /// Writes `<stem>.json` and `<stem>_confusion.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.json")), self.to_json() + "\n")?;
        fs::write(dir.join(format!("{stem}_confusion.csv")), self.confusion_csv())?;
        Ok(())
    }
}

fn class_name(k: usize) -> String {
    ClassLabel::new(k).map(|c| c.name()).unwrap_or_else(|_| format!("c{k}"))
}

/// Scores predictions made by `predict` (which returns a probability or
/// logit vector per input). Ties go to the lowest class index.
pub fn evaluate_with(samples: &[Sample], mut predict: impl FnMut(&Tensor<f32>) -> Result<Tensor<f32>>) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::data("cannot evaluate an empty split"));
    }
    let mut cm = ConfusionMatrix::new(NUM_CLASSES);
    for s in samples {
        let out = predict(&crate::data::normalize(&s.image))?;
        if out.len() != NUM_CLASSES {
            return Err(Error::shape(format!(
                "model produced {} outputs, expected {NUM_CLASSES}",
                out.len()
            )));
        }
        cm.record(s.label.index(), out.argmax());
    }
    Ok(EvalReport::from_confusion(cm))
}

pub fn evaluate(model: &ModelGraph, samples: &[Sample]) -> Result<EvalReport> {
    evaluate_with(samples, |x| model.forward(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_oracle_two_class() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap();
        assert_eq!(cm.accuracy(), 0.7);
        let pc = cm.per_class_accuracy();
        assert_eq!(pc[0], 0.75);
        assert!((pc[1] - 2.0 / 3.0).abs() < 1e-15);
        let f1 = cm.f1_scores();
        assert!((f1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((f1[1] - 8.0 / 11.0).abs() < 1e-15);
        assert!((cm.macro_f1() - 23.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let mut perfect = ConfusionMatrix::new(10);
        let mut constant = ConfusionMatrix::new(10);
        for k in 0..10 {
            for _ in 0..7 {
                perfect.record(k, k);
                constant.record(k, 4);
            }
        }
        assert_eq!(perfect.accuracy(), 1.0);
        assert_eq!(perfect.macro_f1(), 1.0);
        assert_eq!(perfect.trace(), perfect.total());
        assert!((constant.accuracy() - 0.1).abs() < 1e-15);
        // Only class 4 has a nonzero F1.
        assert_eq!(constant.f1_scores().iter().filter(|&&f| f > 0.0).count(), 1);
    }

    #[test]
    fn weighted_identity_and_empty_class() {
        let cm = ConfusionMatrix::from_rows(&[vec![5, 2, 0], vec![0, 0, 0], vec![1, 3, 4]]).unwrap();
        let n = cm.total() as f64;
        let weighted: f64 = cm
            .per_class_accuracy()
            .iter()
            .enumerate()
            .map(|(k, a)| cm.row_sum(k) as f64 / n * a)
            .sum();
        assert!((weighted - cm.accuracy()).abs() < 1e-15);
        assert_eq!(cm.per_class_accuracy()[1], 0.0);
        assert_eq!(cm.f1_scores()[1], 0.0);
    }

    #[test]
    fn report_serialization() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 1], vec![2, 4]]).unwrap();
        let r = EvalReport::from_confusion(cm);
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.confusion_csv(), "true\\pred,c0,c1\nc0,3,1\nc1,2,4\n");
        assert!(ConfusionMatrix::from_rows(&[vec![1, 2]]).is_err());
    }
}
