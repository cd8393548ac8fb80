//! Classifiers (CART tree, random forest, k-NN), stratified splitting and scoring.

mod dataset;
mod forest;
mod knn;
mod metrics;
mod model;
mod tree;

pub use dataset::{stratified_split, DatasetMeta, LabeledDataset, SplitPair};
pub use forest::{ForestParams, RandomForest};
pub use knn::{Knn, KnnParams};
pub use metrics::{ClassScores, ConfusionMatrix};
pub use model::{
    evaluate, fit, load_model, predict, save_model, Model, ModelFile, ModelKind, ModelSpec,
    MODEL_FORMAT_VERSION,
};
pub use tree::{gini, DecisionTree, Node, TreeParams};
