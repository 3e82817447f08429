//! Classification metrics from predicted and true labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Unweighted mean of per-class F1; a class with no true positives has F1 0.
    pub macro_f1: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub echo: Vec<(String, String)>,
}

impl EvalReport {
    pub fn from_predictions(labels: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if labels.len() != predicted.len() {
            return Err(crate::error::dim_err(&[labels.len()], &[predicted.len()]));
        }
        if labels.is_empty() {
            return Err(Error::Constraint("no samples to evaluate".into()));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&y, &p) in labels.iter().zip(predicted) {
            if y >= num_classes || p >= num_classes {
                return Err(Error::Index {
                    index: y.max(p),
                    len: num_classes,
                });
            }
            confusion[y][p] += 1;
        }
        let trace: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut precision = Vec::with_capacity(num_classes);
        let mut recall = Vec::with_capacity(num_classes);
        let mut f1_sum = 0.0;
        for c in 0..num_classes {
            let tp = confusion[c][c];
            let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
            let actual_c: usize = confusion[c].iter().sum();
            let (p, r) = (ratio(tp, predicted_c), ratio(tp, actual_c));
            f1_sum += if tp == 0 { 0.0 } else { 2.0 * p * r / (p + r) };
            precision.push(p);
            recall.push(r);
        }
        Ok(Self {
            accuracy: trace as f64 / labels.len() as f64,
            macro_f1: f1_sum / num_classes as f64,
            precision,
            recall,
            confusion,
            echo: Vec::new(),
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}
