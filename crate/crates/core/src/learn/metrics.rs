use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion matrix with label 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Precision and recall of one class. A zero denominator yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::invalid(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::invalid("cannot score an empty test set"));
        }
        let mut m = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => m.tp += 1,
                (0, 0) => m.tn += 1,
                (0, 1) => m.fp += 1,
                (1, 0) => m.fn_ += 1,
                _ => return Err(Error::invalid(format!("non-binary label pair ({t}, {p})"))),
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.correct(), self.total())
    }

    /// Scores for class 0 and class 1.
    pub fn per_class(&self) -> [ClassScores; 2] {
        [
            ClassScores {
                precision: ratio(self.tn, self.tn + self.fn_),
                recall: ratio(self.tn, self.tn + self.fp),
            },
            ClassScores {
                precision: ratio(self.tp, self.tp + self.fp),
                recall: ratio(self.tp, self.tp + self.fn_),
            },
        ]
    }

    /// Two-line text rendering, rows = truth, columns = prediction.
    pub fn render(&self) -> String {
        format!(
            "            pred 0   pred 1\ntrue 0  {:>9} {:>8}\ntrue 1  {:>9} {:>8}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}
