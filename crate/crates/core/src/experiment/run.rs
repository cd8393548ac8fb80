use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::plan::{ExperimentPlan, NULL_CONFIDENCE};
use super::report::{
    aggregate, CaptureSummary, Cell, CellSeeds, Comparison, DatasetKind, Environment,
    ExperimentReport, ModeStatistics, PcapReport, StatisticsReport, Timings,
    REPORT_SCHEMA_VERSION,
};
use crate::cipher::CipherMode;
use crate::error::{Error, Result};
use crate::features::{featurize_corpus, FeatureKind, FeatureMatrix, N_DIGITS};
use crate::forge::{build_corpora, gen_random_plaintexts, gen_zero_plaintexts, CorpusSpec};
use crate::learn::{evaluate, fit, stratified_split, LabeledDataset, ModelSpec};
use crate::pcap::{build_labeled_dataset, extract_payloads, parse_pcap};
use crate::stats::{binomial_upper_bound, differentiation, null_accuracy_interval, summarize};

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct Job<'a> {
    mode: Option<CipherMode>,
    dataset: DatasetKind,
    data: &'a LabeledDataset,
    spec: ModelSpec,
    repetition: usize,
    corpus_seed: String,
    split_seed: u64,
    model_seed: u64,
    split_ratio: f64,
}

fn run_job(job: &Job) -> Result<Cell> {
    let context = || {
        format!(
            "{} / {} / {} / repetition {}",
            job.mode.map(|m| m.to_string()).unwrap_or_else(|| "plain".into()),
            job.dataset.label(),
            job.spec.kind(),
            job.repetition
        )
    };
    let split = stratified_split(job.data, job.split_ratio, job.split_seed).map_err(|e| e.context(context()))?;
    let spec = job.spec.with_seed(job.model_seed);

    let t = Instant::now();
    let model = fit(&spec, &split.train).map_err(|e| e.context(context()))?;
    let fit_ms = elapsed_ms(t);
    let t = Instant::now();
    let confusion = evaluate(&model, &split.test).map_err(|e| e.context(context()))?;
    let eval_ms = elapsed_ms(t);

    let test_size = split.test.len();
    let null_interval = null_accuracy_interval(test_size, NULL_CONFIDENCE);
    let accuracy = confusion.accuracy();
    Ok(Cell {
        mode: job.mode,
        dataset: job.dataset,
        model: spec.kind(),
        repetition: job.repetition,
        train_size: split.train.len(),
        test_size,
        confusion,
        accuracy,
        per_class: confusion.per_class(),
        null_interval,
        within_null: accuracy >= null_interval.0 && accuracy <= null_interval.1,
        degenerate_model: model.degenerate(),
        seeds: CellSeeds {
            corpus_seed: job.corpus_seed.clone(),
            split_seed: job.split_seed,
            model_seed: job.model_seed,
        },
        timings: Timings { fit_ms, eval_ms },
    })
}

fn run_jobs(jobs: &[Job]) -> Result<Vec<Cell>> {
    let mut cells: Vec<Cell> = jobs.par_iter().map(run_job).collect::<Result<_>>()?;
    cells.sort_by_key(|c| c.key());
    Ok(cells)
}

/// Featurized single- and triple-encrypted datasets of one (repetition, mode).
fn encrypted_datasets(plan: &ExperimentPlan, spec: &CorpusSpec) -> Result<Vec<(DatasetKind, LabeledDataset)>> {
    let corpora = build_corpora(spec)?;
    let kind = plan.feature_kind;
    let mut out = Vec::new();
    for dataset in [DatasetKind::Zeros, DatasetKind::Random] {
        let (single, triple) = dataset.sets();
        let x0 = featurize_corpus(corpora.get(single).expect("encrypted set"), kind)?;
        let x1 = featurize_corpus(corpora.get(triple).expect("encrypted set"), kind)?;
        let data = LabeledDataset::from_classes(&x0, &x1)?
            .with_meta("mode", spec.mode.to_string())
            .with_meta("class0", single.to_string())
            .with_meta("class1", triple.to_string())
            .with_meta("corpus_seed", hex::encode(spec.master_seed));
        out.push((dataset, data));
    }
    Ok(out)
}

fn model_label(dataset: DatasetKind, mode: Option<CipherMode>, spec: &ModelSpec) -> String {
    format!(
        "model/{}/{}/{}",
        mode.map(|m| m.to_string()).unwrap_or_else(|| "plain".into()),
        dataset.label(),
        spec.kind()
    )
}

/// Single- vs triple-encryption classification over every (mode, dataset,
/// model, repetition) cell of the plan.
pub fn run_distinguishability(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let start = Instant::now();
    let mut cells = Vec::new();
    for repetition in 0..plan.repetitions {
        for &mode in &plan.modes {
            let spec = plan.corpus_for(repetition, mode);
            let datasets = encrypted_datasets(plan, &spec)?;
            let corpus_seed = hex::encode(spec.master_seed);
            let mut jobs = Vec::new();
            for (dataset, data) in &datasets {
                let split_seed = plan.derived_u64(repetition, &format!("split/{mode}/{}", dataset.label()));
                for model in &plan.models {
                    jobs.push(Job {
                        mode: Some(mode),
                        dataset: *dataset,
                        data,
                        spec: *model,
                        repetition,
                        corpus_seed: corpus_seed.clone(),
                        split_seed,
                        model_seed: plan.derived_u64(repetition, &model_label(*dataset, Some(mode), model)),
                        split_ratio: plan.split_ratio,
                    });
                }
            }
            cells.extend(run_jobs(&jobs)?);
        }
    }
    cells.sort_by_key(|c| c.key());
    let aggregates = aggregate(&cells);
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        plan: plan.clone(),
        cells,
        aggregates,
        controls: Vec::new(),
        environment: Environment::current(),
        generated_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        total_ms: elapsed_ms(start),
        content_digest: String::new(),
    }
    .seal())
}

/// Z0 against R0 with no encryption: a working pipeline must separate these.
pub fn run_positive_control(plan: &ExperimentPlan) -> Result<Vec<Cell>> {
    plan.validate()?;
    let spec = plan.corpus_for(0, plan.corpus.mode);
    let zeros = featurize_corpus(&gen_zero_plaintexts(&spec)?, plan.feature_kind)?;
    let randoms = featurize_corpus(&gen_random_plaintexts(&spec)?, plan.feature_kind)?;
    let data = LabeledDataset::from_classes(&zeros, &randoms)?;
    let dataset = DatasetKind::PlainControl;
    let jobs: Vec<Job> = plan
        .models
        .iter()
        .map(|model| Job {
            mode: None,
            dataset,
            data: &data,
            spec: *model,
            repetition: 0,
            corpus_seed: hex::encode(spec.master_seed),
            split_seed: plan.derived_u64(0, "split/plain"),
            model_seed: plan.derived_u64(0, &model_label(dataset, None, model)),
            split_ratio: plan.split_ratio,
        })
        .collect();
    run_jobs(&jobs)
}

/// [`run_distinguishability`] plus the positive control in `controls`.
pub fn run_with_control(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let mut report = run_distinguishability(plan)?;
    report.controls = run_positive_control(plan)?;
    Ok(report.seal())
}

fn compare(
    a: (crate::forge::SetName, &FeatureMatrix),
    b: (crate::forge::SetName, &FeatureMatrix),
    plan: &ExperimentPlan,
) -> Result<Comparison> {
    let differentiation = differentiation(a.1, b.1, plan.alpha, plan.bonferroni)?;
    let null_bound = binomial_upper_bound(a.1.n_cols() as u64, differentiation.effective_alpha, NULL_CONFIDENCE);
    Ok(Comparison {
        a: a.0,
        b: b.0,
        consistent_with_null: differentiation.significant as u64 <= null_bound,
        null_bound,
        differentiation,
    })
}

/// Descriptive statistics and per-feature Mann-Whitney tests on repetition 0's corpora.
pub fn run_statistics(plan: &ExperimentPlan) -> Result<StatisticsReport> {
    use crate::forge::SetName::*;
    plan.validate()?;
    let kind = plan.feature_kind;
    let mut modes = Vec::new();
    for &mode in &plan.modes {
        let spec = plan.corpus_for(0, mode);
        let corpora = build_corpora(&spec)?;
        let mut feats: BTreeMap<crate::forge::SetName, FeatureMatrix> = BTreeMap::new();
        feats.insert(R0, featurize_corpus(&gen_random_plaintexts(&spec)?, kind)?);
        feats.insert(Z0, featurize_corpus(&gen_zero_plaintexts(&spec)?, kind)?);
        for name in [R1, R3, Z1, Z3] {
            feats.insert(name, featurize_corpus(corpora.get(name).unwrap(), kind)?);
        }
        let summaries = feats
            .iter()
            .map(|(name, m)| Ok((name.to_string(), summarize(m)?)))
            .collect::<Result<_>>()?;
        let pair = |a, b| compare((a, &feats[&a]), (b, &feats[&b]), plan);
        let comparisons = vec![pair(R1, R3)?, pair(Z1, Z3)?, pair(R1, R1)?, pair(Z0, R0)?];
        modes.push(ModeStatistics {
            mode,
            summaries,
            comparisons,
        });
    }
    Ok(StatisticsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        plan: plan.clone(),
        modes,
    })
}

#[derive(Debug, Clone)]
pub struct PcapOptions {
    pub feature_kind: FeatureKind,
    pub balance: bool,
    pub split_ratio: f64,
    pub seed: u64,
    /// Randomly permute labels after assembly. A label-permutation control:
    /// accuracy should then sit at chance.
    pub shuffle_labels: bool,
}

impl Default for PcapOptions {
    fn default() -> Self {
        PcapOptions {
            feature_kind: FeatureKind::Ratio,
            balance: true,
            split_ratio: super::plan::DEFAULT_SPLIT,
            seed: 0,
            shuffle_labels: false,
        }
    }
}

/// Captures A (label 0) and B (label 1) through extraction, balancing,
/// featurization, split, fit and evaluation for each model.
pub fn run_pcap_pipeline(
    file_a: &Path,
    file_b: &Path,
    models: &[ModelSpec],
    options: &PcapOptions,
) -> Result<PcapReport> {
    if models.is_empty() {
        return Err(Error::invalid("no models requested"));
    }
    let load = |path: &Path| -> Result<_> {
        let capture = parse_pcap(path)?;
        let ex = extract_payloads(&capture).map_err(|e| e.context(path.display().to_string()))?;
        let summary = CaptureSummary {
            path: path.display().to_string(),
            packets: ex.packets_in,
            payloads: ex.records.len(),
            skipped: ex.skipped,
        };
        Ok((ex.records, summary))
    };
    let (a, class_a) = load(file_a)?;
    let (b, class_b) = load(file_b)?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "each capture needs at least 2 TCP payloads, got {} ({}) and {} ({})",
            a.len(),
            file_a.display(),
            b.len(),
            file_b.display()
        )));
    }
    let mut data = build_labeled_dataset(&a, &b, options.feature_kind, options.balance, options.seed)?;
    if options.shuffle_labels {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(1);
        data.labels.shuffle(&mut rng);
        data = data.with_meta("labels_shuffled", true);
    }
    debug_assert_eq!(data.n_features(), N_DIGITS);
    let class_rows = data.class_counts();
    let dataset = DatasetKind::PlainControl;
    let jobs: Vec<Job> = models
        .iter()
        .enumerate()
        .map(|(i, model)| Job {
            mode: None,
            dataset,
            data: &data,
            spec: *model,
            repetition: 0,
            corpus_seed: String::new(),
            split_seed: options.seed,
            model_seed: options.seed.wrapping_add(i as u64 + 1),
            split_ratio: options.split_ratio,
        })
        .collect();
    Ok(PcapReport {
        schema_version: REPORT_SCHEMA_VERSION,
        class_a,
        class_b,
        feature_kind: options.feature_kind,
        balanced: options.balance,
        labels_shuffled: options.shuffle_labels,
        class_rows,
        split_ratio: options.split_ratio,
        seed: options.seed,
        cells: run_jobs(&jobs)?,
    })
}
