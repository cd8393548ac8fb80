use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::forest::{ForestParams, RandomForest};
use super::knn::{Knn, KnnParams};
use super::metrics::ConfusionMatrix;
use super::tree::{DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Dt,
    Rf,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Knn];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dt => "DT",
            ModelKind::Rf => "RF",
            ModelKind::Knn => "KNN",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt" | "tree" => Ok(ModelKind::Dt),
            "rf" | "forest" => Ok(ModelKind::Rf),
            "knn" => Ok(ModelKind::Knn),
            _ => Err(Error::invalid(format!("unknown model {s:?}"))),
        }
    }
}

/// Which classifier to fit and with what hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum ModelSpec {
    Dt(TreeParams),
    Rf(ForestParams),
    Knn(KnnParams),
}

impl ModelSpec {
    /// Default hyperparameters for `kind`; `seed` only matters for RF.
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Dt => ModelSpec::Dt(TreeParams::default()),
            ModelKind::Rf => ModelSpec::Rf(ForestParams {
                seed,
                ..ForestParams::default()
            }),
            ModelKind::Knn => ModelSpec::Knn(KnnParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Dt(_) => ModelKind::Dt,
            ModelSpec::Rf(_) => ModelKind::Rf,
            ModelSpec::Knn(_) => ModelKind::Knn,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ModelSpec::Rf(p) => ModelSpec::Rf(ForestParams { seed, ..p }),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Model {
    Dt(DecisionTree),
    Rf(RandomForest),
    Knn(Knn),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Dt(t) => t.n_features,
            Model::Rf(f) => f.n_features,
            Model::Knn(k) => k.train.n_cols(),
        }
    }

    /// True when fitting fell back to a constant majority-class predictor.
    pub fn degenerate(&self) -> bool {
        match self {
            Model::Dt(t) => t.degenerate,
            Model::Rf(f) => f.degenerate,
            Model::Knn(_) => false,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            Model::Dt(t) => t.predict_row(row),
            Model::Rf(f) => f.predict_row(row),
            Model::Knn(k) => k.predict_row(row),
        }
    }
}

pub fn fit(spec: &ModelSpec, train: &LabeledDataset) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    let (x, y) = (&train.features, train.labels.as_slice());
    Ok(match spec {
        ModelSpec::Dt(p) => Model::Dt(DecisionTree::fit(p, x, y)?),
        ModelSpec::Rf(p) => Model::Rf(RandomForest::fit(p, x, y)?),
        ModelSpec::Knn(p) => Model::Knn(Knn::fit(p, x, y)?),
    })
}

pub fn predict(model: &Model, features: &FeatureMatrix) -> Result<Vec<u8>> {
    if features.n_cols() != model.n_features() {
        return Err(Error::invalid(format!(
            "model expects {} columns, input has {}",
            model.n_features(),
            features.n_cols()
        )));
    }
    let rows: Vec<&[f64]> = features.rows().collect();
    Ok(rows.par_iter().map(|r| model.predict_row(r)).collect())
}

pub fn evaluate(model: &Model, test: &LabeledDataset) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let predicted = predict(model, &test.features)?;
    ConfusionMatrix::from_predictions(&test.labels, &predicted)
}

/// On-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub degenerate: bool,
    pub model: Model,
}

pub fn save_model(path: &Path, spec: &ModelSpec, model: &Model) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        spec: *spec,
        degenerate: model.degenerate(),
        model: model.clone(),
    };
    fs::write(path, serde_json::to_vec(&file)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let file: ModelFile =
        serde_json::from_slice(&fs::read(path).map_err(|e| Error::io(path, e))?)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format version {}",
            file.format_version
        )));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> LabeledDataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = i as f64 / 40.0;
            rows.push([t, 1.0 - t, 0.2, 0.7]);
            labels.push(0);
            rows.push([t + 2.0, t, 0.2, 0.7]);
            labels.push(1);
        }
        LabeledDataset::new(FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn all_models_fit_separable_data() {
        let d = blobs();
        for kind in ModelKind::ALL {
            let m = fit(&ModelSpec::default_for(kind, 1), &d).unwrap();
            assert_eq!(evaluate(&m, &d).unwrap().accuracy(), 1.0, "{kind}");
        }
    }

    #[test]
    fn knn_with_k_equal_n_predicts_majority() {
        let mut d = blobs();
        d.labels[1] = 0; // 41 zeros, 39 ones
        let m = fit(&ModelSpec::Knn(KnnParams { k: d.len() }), &d).unwrap();
        let p = predict(&m, &FeatureMatrix::from_rows(&[[9.0, 9.0, 9.0, 9.0], [-3.0, 0.0, 0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(p, vec![0, 0]);
    }

    #[test]
    fn degenerate_training_set_predicts_constant() {
        let x = FeatureMatrix::from_rows(&[[0.5; 4]; 6]).unwrap();
        let d = LabeledDataset::new(x, vec![1, 1, 1, 0, 0, 1]).unwrap();
        for kind in [ModelKind::Dt, ModelKind::Rf] {
            let m = fit(&ModelSpec::default_for(kind, 3), &d).unwrap();
            assert!(m.degenerate());
            let p = predict(&m, &blobs().features).unwrap();
            assert!(p.iter().all(|&l| l == 1));
        }
    }

    #[test]
    fn column_mismatch_rejected() {
        let m = fit(&ModelSpec::default_for(ModelKind::Dt, 0), &blobs()).unwrap();
        let bad = FeatureMatrix::from_rows(&[[0.0; 2]]).unwrap();
        assert!(matches!(predict(&m, &bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = blobs();
        for kind in ModelKind::ALL {
            let spec = ModelSpec::default_for(kind, 5);
            let m = fit(&spec, &d).unwrap();
            let path = dir.path().join(format!("{kind}.json"));
            save_model(&path, &spec, &m).unwrap();
            let back = load_model(&path).unwrap();
            assert_eq!(back.spec, spec);
            assert_eq!(predict(&back.model, &d.features).unwrap(), predict(&m, &d.features).unwrap());
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("rf".parse::<ModelKind>().unwrap(), ModelKind::Rf);
        assert_eq!("KNN".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
