use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::plan::ExperimentPlan;
use crate::cipher::CipherMode;
use crate::forge::SetName;
use crate::learn::{ClassScores, ConfusionMatrix, ModelKind};
use crate::pcap::SkipCounters;
use crate::stats::{Differentiation, FeatureSummary};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON schema the distinguishability report validates against.
pub const EXPERIMENT_REPORT_SCHEMA: &str = include_str!("../../schemas/experiment_report.v1.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetKind {
    /// Z1 against Z3.
    #[serde(rename = "D_Z")]
    Zeros,
    /// R1 against R3.
    #[serde(rename = "D_R")]
    Random,
    /// Z0 against R0, no encryption.
    #[serde(rename = "Z0_vs_R0")]
    PlainControl,
}

impl DatasetKind {
    pub fn sets(self) -> (SetName, SetName) {
        match self {
            DatasetKind::Zeros => (SetName::Z1, SetName::Z3),
            DatasetKind::Random => (SetName::R1, SetName::R3),
            DatasetKind::PlainControl => (SetName::Z0, SetName::R0),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DatasetKind::Zeros => "D_Z",
            DatasetKind::Random => "D_R",
            DatasetKind::PlainControl => "Z0_vs_R0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub corpus_seed: String,
    pub split_seed: u64,
    pub model_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub fit_ms: f64,
    pub eval_ms: f64,
}

/// Result of one (mode, dataset, model, repetition) job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Absent for the unencrypted control.
    pub mode: Option<CipherMode>,
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub repetition: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: [ClassScores; 2],
    pub null_interval: (f64, f64),
    pub within_null: bool,
    pub degenerate_model: bool,
    pub seeds: CellSeeds,
    pub timings: Timings,
}

impl Cell {
    pub fn key(&self) -> (Option<CipherMode>, DatasetKind, ModelKind, usize) {
        (self.mode, self.dataset, self.model, self.repetition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: Option<CipherMode>,
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

pub fn aggregate(cells: &[Cell]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Option<CipherMode>, DatasetKind, ModelKind), Vec<f64>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.mode, c.dataset, c.model)).or_default().push(c.accuracy);
    }
    groups
        .into_iter()
        .map(|((mode, dataset, model), acc)| Aggregate {
            mode,
            dataset,
            model,
            runs: acc.len(),
            mean_accuracy: acc.iter().sum::<f64>() / acc.len() as f64,
            min_accuracy: acc.iter().copied().fold(f64::INFINITY, f64::min),
            max_accuracy: acc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    #[serde(default)]
    pub controls: Vec<Cell>,
    pub environment: Environment,
    pub generated_unix: u64,
    pub total_ms: f64,
    /// SHA-256 over the plan, cells, aggregates and controls with timings zeroed.
    pub content_digest: String,
}

fn strip_timings(cells: &[Cell]) -> Vec<Cell> {
    cells
        .iter()
        .map(|c| Cell {
            timings: Timings {
                fit_ms: 0.0,
                eval_ms: 0.0,
            },
            ..c.clone()
        })
        .collect()
}

impl ExperimentReport {
    pub fn compute_digest(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            schema_version: u32,
            plan: &'a ExperimentPlan,
            cells: Vec<Cell>,
            aggregates: &'a [Aggregate],
            controls: Vec<Cell>,
        }
        let view = View {
            schema_version: self.schema_version,
            plan: &self.plan,
            cells: strip_timings(&self.cells),
            aggregates: &self.aggregates,
            controls: strip_timings(&self.controls),
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&view).expect("report serializes")))
    }

    pub fn seal(mut self) -> Self {
        self.content_digest = self.compute_digest();
        self
    }

    /// Cells whose accuracy fell outside the null interval.
    pub fn null_violations(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| !c.within_null).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "distinguishability: {} per set, {} bytes, {} features, split {:.2}, {} repetition(s)",
            self.plan.corpus.count,
            self.plan.corpus.length,
            self.plan.feature_kind,
            self.plan.split_ratio,
            self.plan.repetitions
        );
        let _ = writeln!(
            out,
            "{:<5} {:<9} {:<5} {:>4} {:>7} {:>9}  {:<18} null",
            "mode", "dataset", "model", "rep", "test", "accuracy", "interval"
        );
        for c in self.cells.iter().chain(&self.controls) {
            let _ = writeln!(
                out,
                "{:<5} {:<9} {:<5} {:>4} {:>7} {:>9.4}  [{:.4}, {:.4}]  {}",
                c.mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
                c.dataset.label(),
                c.model.to_string(),
                c.repetition,
                c.test_size,
                c.accuracy,
                c.null_interval.0,
                c.null_interval.1,
                if c.within_null { "inside" } else { "OUTSIDE" }
            );
        }
        let _ = writeln!(out, "\naggregates");
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{:<5} {:<9} {:<5} runs {:>2}  mean {:.4}  min {:.4}  max {:.4}",
                a.mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
                a.dataset.label(),
                a.model.to_string(),
                a.runs,
                a.mean_accuracy,
                a.min_accuracy,
                a.max_accuracy
            );
        }
        let _ = writeln!(out, "\ncontent digest {}", self.content_digest);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: SetName,
    pub b: SetName,
    pub differentiation: Differentiation,
    /// Largest significant-feature count a true null produces with 99.9% probability.
    pub null_bound: u64,
    pub consistent_with_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeStatistics {
    pub mode: CipherMode,
    pub summaries: BTreeMap<String, FeatureSummary>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsReport {
    pub schema_version: u32,
    pub plan: ExperimentPlan,
    pub modes: Vec<ModeStatistics>,
}

impl StatisticsReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.modes {
            let _ = writeln!(out, "== {} ==", m.mode);
            for (name, s) in &m.summaries {
                let _ = writeln!(out, "{name} (n = {})", s.n);
                let _ = writeln!(out, "  digit      mean       std       min       max");
                for d in 0..s.mean.len() {
                    let _ = writeln!(
                        out,
                        "  {:>5x} {:>9.6} {:>9.6} {:>9.6} {:>9.6}",
                        d, s.mean[d], s.std[d], s.min[d], s.max[d]
                    );
                }
            }
            for c in &m.comparisons {
                let d = &c.differentiation;
                let _ = writeln!(
                    out,
                    "{} vs {}: {} of {} features significant at {} (rate {:.4}; null bound {}) {}",
                    c.a,
                    c.b,
                    d.significant,
                    d.tests.len(),
                    d.effective_alpha,
                    d.rate,
                    c.null_bound,
                    if c.consistent_with_null { "consistent with null" } else { "DIFFERENT" }
                );
                let _ = writeln!(out, "  digit            U1          z          p  sig");
                for (j, t) in d.tests.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "  {:>5x} {:>13.1} {:>10.4} {:>10.3e}  {}",
                        j,
                        t.u1,
                        t.z,
                        t.p,
                        if t.significant { "*" } else { "" }
                    );
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSummary {
    pub path: String,
    pub packets: u64,
    pub payloads: usize,
    pub skipped: SkipCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcapReport {
    pub schema_version: u32,
    pub class_a: CaptureSummary,
    pub class_b: CaptureSummary,
    pub feature_kind: crate::features::FeatureKind,
    pub balanced: bool,
    #[serde(default)]
    pub labels_shuffled: bool,
    pub class_rows: [usize; 2],
    pub split_ratio: f64,
    pub seed: u64,
    pub cells: Vec<Cell>,
}

impl PcapReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (label, c) in [("A (label 0)", &self.class_a), ("B (label 1)", &self.class_b)] {
            let _ = writeln!(
                out,
                "class {label}: {} -> {} packets, {} payloads, skipped {:?}",
                c.path, c.packets, c.payloads, c.skipped
            );
        }
        let _ = writeln!(
            out,
            "rows per class: {} / {} ({}{})",
            self.class_rows[0],
            self.class_rows[1],
            if self.balanced { "balanced" } else { "unbalanced" },
            if self.labels_shuffled { ", labels shuffled" } else { "" }
        );
        for c in &self.cells {
            let [s0, s1] = c.per_class;
            let _ = writeln!(
                out,
                "{:<4} accuracy {:.4}  class0 P {:.4} R {:.4}  class1 P {:.4} R {:.4}",
                c.model.to_string(),
                c.accuracy,
                s0.precision,
                s0.recall,
                s1.precision,
                s1.recall
            );
            out.push_str(&c.confusion.render());
        }
        out
    }
}
