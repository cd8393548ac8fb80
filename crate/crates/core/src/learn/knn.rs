use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Brute-force k-nearest-neighbours under Euclidean distance.
///
/// Equidistant neighbours are ranked by training index (lower first); a tied
/// vote predicts 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub train: FeatureMatrix,
    pub labels: Vec<u8>,
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Knn {
    pub fn fit(params: &KnnParams, x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if x.n_rows() != y.len() {
            return Err(Error::invalid("feature rows and labels differ in length"));
        }
        if params.k > x.n_rows() {
            return Err(Error::invalid(format!(
                "k = {} exceeds the {} training rows",
                params.k,
                x.n_rows()
            )));
        }
        Ok(Knn {
            k: params.k,
            train: x.clone(),
            labels: y.to_vec(),
        })
    }

    /// Training indices of the `k` nearest rows, nearest first.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(self.k + 1);
        for (index, row) in self.train.rows().enumerate() {
            let dist: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            if heap.len() < self.k {
                heap.push(Candidate { dist, index });
            } else if let Some(worst) = heap.peek() {
                // Later indices lose ties, so only a strictly smaller distance displaces.
                if dist < worst.dist {
                    heap.pop();
                    heap.push(Candidate { dist, index });
                }
            }
        }
        heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let ones = self
            .neighbours(row)
            .iter()
            .filter(|&&i| self.labels[i] == 1)
            .count();
        (2 * ones > self.k) as u8
    }
}
