use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Free-form provenance carried alongside a dataset (mode, corpus names, seed, ...).
pub type DatasetMeta = BTreeMap<String, serde_json::Value>;

/// Feature rows with binary labels: 0 = single-encrypted (or class A), 1 = triple-encrypted (class B).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<u8>,
    #[serde(default)]
    pub meta: DatasetMeta,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<u8>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("labels must be 0 or 1, found {bad}")));
        }
        Ok(LabeledDataset {
            features,
            labels,
            meta: DatasetMeta::new(),
        })
    }

    /// Stacks `class0` rows (label 0) above `class1` rows (label 1).
    pub fn from_classes(class0: &FeatureMatrix, class1: &FeatureMatrix) -> Result<Self> {
        let features = class0.vstack(class1)?;
        let mut labels = vec![0u8; class0.n_rows()];
        labels.resize(class0.n_rows() + class1.n_rows(), 1);
        LabeledDataset::new(features, labels)
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub ratio: f64,
    pub seed: u64,
}

/// Per-class shuffled split; each class contributes `round(ratio * n_class)`
/// rows to training (at least one row to each side). Indices come back sorted.
pub fn stratified_split(data: &LabeledDataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let counts = data.class_counts();
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::invalid(format!(
            "stratified split needs at least 2 rows per class, got {counts:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPair {
        train: data.subset(&train),
        test: data.subset(&test),
        train_indices: train,
        test_indices: test,
        ratio,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n0: usize, n1: usize) -> LabeledDataset {
        let rows: Vec<[f64; 2]> = (0..n0 + n1).map(|i| [i as f64, 0.0]).collect();
        let mut labels = vec![0u8; n0];
        labels.extend(vec![1u8; n1]);
        LabeledDataset::new(FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn seventy_five_twenty_five() {
        let d = toy(100, 100);
        let s = stratified_split(&d, 0.75, 7).unwrap();
        assert_eq!(s.train.class_counts(), [75, 75]);
        assert_eq!(s.test.class_counts(), [25, 25]);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_under_seed() {
        let d = toy(40, 60);
        let a = stratified_split(&d, 0.75, 3).unwrap();
        let b = stratified_split(&d, 0.75, 3).unwrap();
        let c = stratified_split(&d, 0.75, 4).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        assert_ne!(a.train_indices, c.train_indices);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(stratified_split(&toy(10, 0), 0.75, 0).is_err());
        assert!(stratified_split(&toy(10, 1), 0.75, 0).is_err());
        assert!(stratified_split(&toy(10, 10), 1.0, 0).is_err());
        let m = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(LabeledDataset::new(m.clone(), vec![0]).is_err());
        assert!(LabeledDataset::new(m, vec![0, 2]).is_err());
    }

    #[test]
    fn tiny_classes_keep_one_test_row() {
        let s = stratified_split(&toy(2, 3), 0.75, 1).unwrap();
        assert_eq!(s.test.class_counts(), [1, 1]);
    }
}
