use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_rows, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
    #[serde(flatten)]
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: 4,
            bootstrap: true,
            seed: 0,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        if !(1..=10_000).contains(&self.n_trees) {
            return Err(Error::invalid(format!(
                "n_trees must lie in 1..=10000, got {}",
                self.n_trees
            )));
        }
        if self.features_per_split == 0 {
            return Err(Error::invalid("features_per_split must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
    /// Labels were mixed but no tree found a split.
    pub degenerate: bool,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample and feature subsets from ChaCha8
    /// stream `t` of `seed`, so the forest does not depend on thread count.
    pub fn fit(params: &ForestParams, x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        params.validate()?;
        if params.features_per_split > x.n_cols() {
            return Err(Error::invalid(format!(
                "features_per_split {} exceeds {} features",
                params.features_per_split,
                x.n_cols()
            )));
        }
        let n = x.n_rows();
        if n == 0 {
            return Err(Error::invalid("cannot fit a forest on zero rows"));
        }
        let trees: Vec<DecisionTree> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let rows: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                fit_rows(&params.tree, x, y, rows, Some((rng, params.features_per_split)))
            })
            .collect::<Result<_>>()?;
        let mixed = y.contains(&0) && y.contains(&1);
        let degenerate = mixed
            && trees
                .iter()
                .all(|t: &DecisionTree| matches!(t.root, super::tree::Node::Leaf { .. }));
        Ok(RandomForest {
            n_features: x.n_cols(),
            trees,
            degenerate,
        })
    }

    /// Majority vote of the trees; a tied vote predicts 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        (2 * ones > self.trees.len()) as u8
    }
}
