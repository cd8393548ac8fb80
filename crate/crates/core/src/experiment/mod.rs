//! End-to-end runs: corpora → features → split → fit → evaluate, plus the
//! statistics and pcap workflows and their reports.

mod plan;
mod report;
mod run;

pub use plan::{ExperimentPlan, DEFAULT_REPETITIONS, DEFAULT_SPLIT, NULL_CONFIDENCE};
pub use report::{
    aggregate, Aggregate, CaptureSummary, Cell, CellSeeds, Comparison, DatasetKind, Environment,
    ExperimentReport, ModeStatistics, PcapReport, StatisticsReport, Timings,
    EXPERIMENT_REPORT_SCHEMA, REPORT_SCHEMA_VERSION,
};
pub use run::{
    run_distinguishability, run_pcap_pipeline, run_positive_control, run_statistics,
    run_with_control, PcapOptions,
};
