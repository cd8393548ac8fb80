//! CART classification tree with Gini impurity.
//!
//! Each feature's row order is sorted once at the root and stable-partitioned
//! on the way down, so a node costs O(features x rows) instead of a sort per
//! feature.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 20,
            min_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.max_depth) {
            return Err(Error::invalid(format!(
                "max_depth must lie in 1..=64, got {}",
                self.max_depth
            )));
        }
        if self.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: u8,
        counts: [u32; 2],
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub root: Node,
    /// True when no split was possible at the root (constant features, mixed labels).
    pub degenerate: bool,
}

impl DecisionTree {
    pub fn fit(params: &TreeParams, x: &FeatureMatrix, y: &[u8]) -> Result<Self> {
        let rows: Vec<u32> = (0..x.n_rows() as u32).collect();
        fit_rows(params, x, y, rows, None::<(rand_chacha::ChaCha8Rng, usize)>)
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        self.leaf_for(row).0
    }

    /// Label and class counts of the leaf `row` lands in.
    pub fn leaf_for(&self, row: &[f64]) -> (u8, [u32; 2]) {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, counts } => return (*label, *counts),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

fn majority(counts: [u32; 2]) -> u8 {
    // ties go to label 0
    (counts[1] > counts[0]) as u8
}

/// Sum over children of `n_c - sum_k count_k^2 / n_c`; equals `n * weighted_gini`.
#[inline]
fn split_cost(left: [u32; 2], right: [u32; 2]) -> f64 {
    let part = |c: [u32; 2]| {
        let n = (c[0] + c[1]) as f64;
        let sq = (c[0] as f64).powi(2) + (c[1] as f64).powi(2);
        n - sq / n
    };
    part(left) + part(right)
}

/// Gini impurity `1 - sum p_k^2` of a node with the given class counts.
pub fn gini(counts: [u32; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (counts[0] as f64 / n).powi(2) - (counts[1] as f64 / n).powi(2)
}

struct Builder<'a, R> {
    params: &'a TreeParams,
    x: &'a FeatureMatrix,
    y: &'a [u8],
    /// One row ordering per feature, each sorted by that feature within every node range.
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
    sampler: Option<(R, usize)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    n_left: usize,
    cost: f64,
}

/// Fits a tree on `rows` (may contain repeats, e.g. a bootstrap sample).
/// With `sampler = Some((rng, m))`, each node considers `m` randomly drawn
/// non-constant features.
pub(crate) fn fit_rows<R: Rng>(
    params: &TreeParams,
    x: &FeatureMatrix,
    y: &[u8],
    rows: Vec<u32>,
    sampler: Option<(R, usize)>,
) -> Result<DecisionTree> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    if let Some((_, m)) = &sampler {
        if *m == 0 || *m > x.n_cols() {
            return Err(Error::invalid(format!(
                "features_per_split must lie in 1..={}, got {m}",
                x.n_cols()
            )));
        }
    }
    let sorted = (0..x.n_cols())
        .map(|f| {
            let mut r = rows.clone();
            r.sort_by(|&a, &b| {
                x.row(a as usize)[f]
                    .total_cmp(&x.row(b as usize)[f])
                    .then(a.cmp(&b))
            });
            r
        })
        .collect();
    let mut b = Builder {
        params,
        x,
        y,
        sorted,
        goes_left: vec![false; x.n_rows()],
        scratch: Vec::with_capacity(rows.len()),
        sampler,
    };
    let root = b.build(0, rows.len(), 0);
    let degenerate = matches!(root, Node::Leaf { counts, .. } if counts[0] > 0 && counts[1] > 0);
    Ok(DecisionTree {
        n_features: x.n_cols(),
        root,
        degenerate,
    })
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, start: usize, end: usize) -> [u32; 2] {
        let mut c = [0u32; 2];
        for &r in &self.sorted[0][start..end] {
            c[self.y[r as usize] as usize] += 1;
        }
        c
    }

    fn value(&self, row: u32, feature: usize) -> f64 {
        self.x.row(row as usize)[feature]
    }

    fn is_constant(&self, feature: usize, start: usize, end: usize) -> bool {
        let s = &self.sorted[feature];
        self.value(s[start], feature) == self.value(s[end - 1], feature)
    }

    fn candidate_features(&mut self, start: usize, end: usize) -> Vec<usize> {
        let n_features = self.x.n_cols();
        let mut feats: Vec<usize> = match self.sampler.take() {
            None => (0..n_features)
                .filter(|&f| !self.is_constant(f, start, end))
                .collect(),
            Some((mut rng, m)) => {
                let mut order: Vec<usize> = (0..n_features).collect();
                order.shuffle(&mut rng);
                let picked = order
                    .into_iter()
                    .filter(|&f| !self.is_constant(f, start, end))
                    .take(m)
                    .collect();
                self.sampler = Some((rng, m));
                picked
            }
        };
        feats.sort_unstable();
        feats
    }

    fn best_split(&mut self, start: usize, end: usize, total: [u32; 2]) -> Option<BestSplit> {
        let min_leaf = self.params.min_leaf;
        let n = end - start;
        let mut best: Option<BestSplit> = None;
        for f in self.candidate_features(start, end) {
            let order = &self.sorted[f][start..end];
            let mut left = [0u32; 2];
            for i in 0..n - 1 {
                left[self.y[order[i] as usize] as usize] += 1;
                let n_left = i + 1;
                if n_left < min_leaf {
                    continue;
                }
                if n - n_left < min_leaf {
                    break;
                }
                let v = self.value(order[i], f);
                let next = self.value(order[i + 1], f);
                if v == next {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let cost = split_cost(left, right);
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        n_left,
                        cost,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, start: usize, end: usize, depth: usize) -> Node {
        let counts = self.counts(start, end);
        let leaf = Node::Leaf {
            label: majority(counts),
            counts,
        };
        let n = end - start;
        if counts[0] == 0 || counts[1] == 0 || depth >= self.params.max_depth || n < 2 * self.params.min_leaf {
            return leaf;
        }
        let Some(split) = self.best_split(start, end, counts) else {
            return leaf;
        };

        for &r in &self.sorted[split.feature][start..end] {
            self.goes_left[r as usize] = self.value(r, split.feature) <= split.threshold;
        }
        let mid = start + split.n_left;
        for f in 0..self.sorted.len() {
            self.scratch.clear();
            let slice = &mut self.sorted[f][start..end];
            let mut w = 0;
            for i in 0..slice.len() {
                let r = slice[i];
                if self.goes_left[r as usize] {
                    slice[w] = r;
                    w += 1;
                } else {
                    self.scratch.push(r);
                }
            }
            debug_assert_eq!(start + w, mid);
            slice[w..].copy_from_slice(&self.scratch);
        }

        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: &[[f64; 2]], y: &[u8], params: TreeParams) -> DecisionTree {
        DecisionTree::fit(&params, &FeatureMatrix::from_rows(rows).unwrap(), y).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini([10, 0]), 0.0);
        assert_eq!(gini([0, 3]), 0.0);
        assert_eq!(gini([5, 5]), 0.5);
    }

    #[test]
    fn separable_data_is_learned() {
        let rows = [[0.1, 5.0], [0.2, 1.0], [0.3, 3.0], [0.7, 2.0], [0.8, 4.0], [0.9, 0.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let t = fit(&rows, &y, TreeParams::default());
        assert_eq!(t.root.depth(), 1);
        match &t.root {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            _ => panic!("expected a split"),
        }
        for (r, l) in rows.iter().zip(y) {
            assert_eq!(t.predict_row(r), l);
        }
    }

    #[test]
    fn constant_features_fall_back_to_majority() {
        let rows = [[1.0, 1.0]; 5];
        let t = fit(&rows, &[1, 1, 0, 1, 0], TreeParams::default());
        assert!(t.degenerate);
        assert_eq!(t.predict_row(&[9.0, 9.0]), 1);
        let tie = fit(&rows[..4], &[1, 0, 1, 0], TreeParams::default());
        assert_eq!(tie.predict_row(&[0.0, 0.0]), 0);
    }

    #[test]
    fn never_splits_on_constant_feature() {
        // Feature 1 is constant; feature 0 carries a noisy signal.
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [(i * 7 % 40) as f64, 3.0]).collect();
        let y: Vec<u8> = (0..40).map(|i| ((i * 7 % 40) > 20 || i % 5 == 0) as u8).collect();
        let t = fit(&rows, &y, TreeParams::default());
        fn check(n: &Node) {
            if let Node::Split { feature, left, right, .. } = n {
                assert_eq!(*feature, 0);
                check(left);
                check(right);
            }
        }
        check(&t.root);
    }

    #[test]
    fn depth_and_leaf_limits() {
        let rows: Vec<[f64; 2]> = (0..64).map(|i| [i as f64, 0.0]).collect();
        let y: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let shallow = fit(&rows, &y, TreeParams { max_depth: 3, min_leaf: 1 });
        assert!(shallow.root.depth() <= 3);
        let coarse = fit(&rows, &y, TreeParams { max_depth: 20, min_leaf: 8 });
        assert!(coarse.root.leaves() <= 8);
        assert!(TreeParams { max_depth: 0, min_leaf: 1 }.validate().is_err());
        assert!(TreeParams { max_depth: 5, min_leaf: 0 }.validate().is_err());
    }

    #[test]
    fn training_rows_land_in_their_leaves() {
        let rows: Vec<[f64; 2]> = (0..50).map(|i| [(i * 13 % 50) as f64, (i * 7 % 11) as f64]).collect();
        let y: Vec<u8> = (0..50).map(|i| ((i * 31) % 3 == 0) as u8).collect();
        let t = fit(&rows, &y, TreeParams::default());
        // Distinct rows and unlimited-ish depth: every training row is recovered.
        for (r, l) in rows.iter().zip(&y) {
            assert_eq!(t.predict_row(r), *l);
        }
    }

    #[test]
    fn midpoint_between_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = fit(&[[a, 0.0], [b, 0.0]], &[0, 1], TreeParams::default());
        assert_eq!(t.predict_row(&[a, 0.0]), 0);
        assert_eq!(t.predict_row(&[b, 0.0]), 1);
    }
}
