use serde::{Deserialize, Serialize};

use crate::cipher::CipherMode;
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::forge::{child_seed, CorpusSpec, DEFAULT_COUNT, PAPER_COUNT};
use crate::learn::{ModelKind, ModelSpec};
use crate::stats::DEFAULT_ALPHA;

pub const DEFAULT_SPLIT: f64 = 0.75;
pub const DEFAULT_REPETITIONS: usize = 5;
/// Two-sided coverage of the binomial null interval every accuracy is checked against.
pub const NULL_CONFIDENCE: f64 = 0.999;

/// Everything one distinguishability run needs. `corpus.mode` is ignored in
/// favour of `modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub corpus: CorpusSpec,
    pub modes: Vec<CipherMode>,
    pub models: Vec<ModelSpec>,
    pub feature_kind: FeatureKind,
    pub split_ratio: f64,
    pub repetitions: usize,
    pub alpha: f64,
    #[serde(default)]
    pub bonferroni: bool,
}

impl ExperimentPlan {
    /// All three modes and models at desk scale, RATIO features, 75:25 split.
    pub fn new(master_seed: [u8; 32]) -> Self {
        ExperimentPlan {
            corpus: CorpusSpec::new(DEFAULT_COUNT, CipherMode::Ctr, master_seed),
            modes: CipherMode::ALL.to_vec(),
            models: ModelKind::ALL
                .iter()
                .map(|&k| ModelSpec::default_for(k, 0))
                .collect(),
            feature_kind: FeatureKind::Ratio,
            split_ratio: DEFAULT_SPLIT,
            repetitions: DEFAULT_REPETITIONS,
            alpha: DEFAULT_ALPHA,
            bonferroni: false,
        }
    }

    pub fn paper_scale(mut self) -> Self {
        self.corpus.count = PAPER_COUNT;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "split ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.modes.is_empty() || self.models.is_empty() {
            return Err(Error::invalid("plan needs at least one mode and one model"));
        }
        if self.corpus.count < 2 {
            return Err(Error::invalid("each class needs at least 2 samples to split"));
        }
        Ok(())
    }

    pub fn repetition_seed(&self, repetition: usize) -> [u8; 32] {
        child_seed(&self.corpus.master_seed, "repetition", repetition as u64)
    }

    /// Corpus spec for one (repetition, mode).
    pub fn corpus_for(&self, repetition: usize, mode: CipherMode) -> CorpusSpec {
        let rep = self.repetition_seed(repetition);
        CorpusSpec {
            mode,
            master_seed: child_seed(&rep, &format!("corpus/{mode}"), 0),
            ..self.corpus.clone()
        }
    }

    /// Stable u64 seed for a labelled purpose inside one repetition.
    pub fn derived_u64(&self, repetition: usize, label: &str) -> u64 {
        let s = child_seed(&self.repetition_seed(repetition), label, 0);
        u64::from_be_bytes(s[..8].try_into().unwrap())
    }
}
