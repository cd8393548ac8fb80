use layerlab_core::experiment::{
    run_distinguishability, run_pcap_pipeline, run_positive_control, run_statistics, run_with_control,
    ExperimentPlan, ExperimentReport, PcapOptions, EXPERIMENT_REPORT_SCHEMA,
};
use layerlab_core::forge::{seed_from_u64, SetName};
use layerlab_core::learn::{KnnParams, TreeParams};
use layerlab_core::pcap::builder::FrameSpec;
use layerlab_core::pcap::{write_pcap, PacketRecord};
use layerlab_core::{CipherMode, ModelKind, ModelSpec};

fn small_plan(seed: u64) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(seed_from_u64(seed));
    plan.corpus.count = 300;
    plan.corpus.length = 64;
    plan.repetitions = 2;
    plan.models = vec![
        ModelSpec::Dt(TreeParams::default()),
        ModelSpec::default_for(ModelKind::Rf, 0),
        ModelSpec::Knn(KnnParams::default()),
    ];
    if let ModelSpec::Rf(p) = &mut plan.models[1] {
        p.n_trees = 10;
    }
    plan
}

#[test]
fn report_has_one_cell_per_mode_dataset_model_repetition() {
    let plan = small_plan(1);
    let report = run_distinguishability(&plan).unwrap();
    assert_eq!(report.cells.len(), 3 * 2 * 3 * 2);
    assert_eq!(report.aggregates.len(), 3 * 2 * 3);
    for a in &report.aggregates {
        assert_eq!(a.runs, 2);
        assert!(a.min_accuracy <= a.mean_accuracy && a.mean_accuracy <= a.max_accuracy);
    }
    for c in &report.cells {
        assert!((0.0..=1.0).contains(&c.accuracy));
        assert_eq!(c.train_size + c.test_size, 600);
        assert_eq!(c.confusion.total() as usize, c.test_size);
    }
    let keys: Vec<_> = report.cells.iter().map(|c| c.key()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(keys, sorted);
}

#[test]
fn same_seed_same_digest_and_other_seed_differs() {
    let a = run_distinguishability(&small_plan(2)).unwrap();
    let b = run_distinguishability(&small_plan(2)).unwrap();
    let c = run_distinguishability(&small_plan(3)).unwrap();
    assert_eq!(a.content_digest, b.content_digest);
    assert_ne!(a.content_digest, c.content_digest);
    assert_eq!(a.content_digest, a.compute_digest());
}

#[test]
fn repetitions_use_distinct_corpora() {
    let plan = small_plan(4);
    assert_ne!(plan.corpus_for(0, CipherMode::Ecb).master_seed, plan.corpus_for(1, CipherMode::Ecb).master_seed);
    assert_ne!(plan.corpus_for(0, CipherMode::Ecb).master_seed, plan.corpus_for(0, CipherMode::Cbc).master_seed);
}

#[test]
fn report_validates_against_shipped_schema() {
    let mut plan = small_plan(5);
    plan.repetitions = 1;
    let report = run_with_control(&plan).unwrap();
    let schema: serde_json::Value = serde_json::from_str(EXPERIMENT_REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance = serde_json::to_value(&report).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = instance.clone();
    broken["cells"][0]["accuracy"] = serde_json::json!(1.5);
    assert!(!validator.is_valid(&broken));

    let back: ExperimentReport = serde_json::from_value(instance).unwrap();
    assert_eq!(back.compute_digest(), report.content_digest);
}

#[test]
fn positive_control_separates_plaintexts() {
    let plan = small_plan(6);
    for cell in run_positive_control(&plan).unwrap() {
        assert!(cell.accuracy >= 0.99, "{} {}", cell.model, cell.accuracy);
        assert!(cell.mode.is_none());
    }
}

#[test]
fn invalid_plan_rejected() {
    let mut plan = small_plan(7);
    plan.split_ratio = 1.0;
    assert!(run_distinguishability(&plan).is_err());
    let mut plan = small_plan(7);
    plan.repetitions = 0;
    assert!(run_statistics(&plan).is_err());
}

#[test]
fn statistics_summaries_and_self_test() {
    let mut plan = small_plan(8);
    plan.corpus.count = 500;
    let report = run_statistics(&plan).unwrap();
    assert_eq!(report.modes.len(), 3);
    for m in &report.modes {
        let z0 = &m.summaries["Z0"];
        assert_eq!(z0.mean[0], 1.0);
        assert!(z0.mean[1..].iter().all(|&v| v == 0.0));
        assert!(z0.std.iter().all(|&v| v == 0.0));
        let find = |a, b| m.comparisons.iter().find(|c| c.a == a && c.b == b).unwrap();
        assert_eq!(find(SetName::R1, SetName::R1).differentiation.significant, 0);
        assert_eq!(find(SetName::Z0, SetName::R0).differentiation.significant, 16);
        assert_eq!(find(SetName::R1, SetName::R3).null_bound, 4);
    }
}

fn capture(payloads: impl Iterator<Item = Vec<u8>>) -> Vec<PacketRecord> {
    payloads
        .enumerate()
        .map(|(i, p)| PacketRecord::new(i as u32, 0, FrameSpec::tcp(p).build()))
        .collect()
}

#[test]
fn pcap_pipeline_disjoint_payloads_are_separable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pcap");
    let b = dir.path().join("b.pcap");
    write_pcap(&capture((0..80).map(|_| vec![0x00; 64])), &a).unwrap();
    write_pcap(&capture((0..50).map(|_| vec![0xab; 64])), &b).unwrap();
    let models: Vec<_> = ModelKind::ALL.iter().map(|&k| ModelSpec::default_for(k, 1)).collect();
    let report = run_pcap_pipeline(&a, &b, &models, &PcapOptions::default()).unwrap();
    assert_eq!(report.class_rows, [50, 50]);
    assert_eq!(report.class_a.payloads, 80);
    for cell in &report.cells {
        assert_eq!(cell.accuracy, 1.0, "{}", cell.model);
        assert_eq!(cell.per_class[0].recall, 1.0);
    }
}

#[test]
fn pcap_pipeline_same_capture_twice_is_chance() {
    use rand::{RngCore, SeedableRng};
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let path = dir.path().join("same.pcap");
    let records = capture((0..1000).map(|_| {
        let mut p = vec![0u8; 128];
        rng.fill_bytes(&mut p);
        p
    }));
    write_pcap(&records, &path).unwrap();
    let models = vec![ModelSpec::Dt(TreeParams::default()), ModelSpec::Knn(KnnParams::default())];
    let report = run_pcap_pipeline(&path, &path, &models, &PcapOptions { seed: 3, shuffle_labels: true, ..PcapOptions::default() }).unwrap();
    assert!(report.labels_shuffled);
    for cell in &report.cells {
        assert!(cell.within_null, "{} accuracy {} outside {:?}", cell.model, cell.accuracy, cell.null_interval);
    }
}

#[test]
fn pcap_pipeline_reports_file_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pcap");
    std::fs::write(&bad, [0u8; 30]).unwrap();
    let err = run_pcap_pipeline(&bad, &bad, &[ModelSpec::Dt(TreeParams::default())], &PcapOptions::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("bad.pcap"), "{err}");
}
