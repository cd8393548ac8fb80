use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use layerlab_core::cipher::KeySize;
use layerlab_core::experiment::{
    run_pcap_pipeline, run_statistics, run_with_control, ExperimentPlan, ExperimentReport,
    PcapOptions, PcapReport, StatisticsReport, DEFAULT_REPETITIONS, DEFAULT_SPLIT,
};
use layerlab_core::features::{
    featurize_payloads, read_features_bin, read_features_csv, write_features_bin, write_features_csv,
};
use layerlab_core::forge::{
    build_corpora, gen_random_plaintexts, gen_zero_plaintexts, read_corpus, seed_from_u64, write_corpus,
    EntropySource, DEFAULT_COUNT, DEFAULT_LENGTH, PAPER_COUNT,
};
use layerlab_core::learn::{evaluate, fit, load_model, save_model, stratified_split};
use layerlab_core::stats::DEFAULT_ALPHA;
use layerlab_core::{CipherMode, FeatureKind, FeatureMatrix, LabeledDataset, ModelKind, ModelSpec, SetName};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_CHECK: u8 = 4;

/// Bad arguments that clap cannot catch on its own.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// `experiment --check` found accuracies outside the null interval.
#[derive(Debug)]
struct CheckFailed(String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "layerlab", version, about = "Layered-encryption distinguishability lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the R0, Z0, R1, R3, Z1 and Z3 corpora.
    Gen(GenArgs),
    /// Hex-digit features of one or two corpus files.
    Features(FeaturesArgs),
    /// Descriptive statistics and Mann-Whitney tests per mode.
    Stats(StatsArgs),
    /// Fit a model on the training split of a labelled feature file.
    Train(TrainArgs),
    /// Evaluate a saved model on a labelled feature file.
    Eval(EvalArgs),
    /// Single- vs triple-encryption classification over every mode, dataset and model.
    Experiment(ExperimentArgs),
    /// Classify TCP payloads of two captures against each other.
    Pcap(PcapArgs),
    /// Re-render a JSON report as text.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Decimal u64 or 64 hex digits.
    #[arg(long, default_value = "0")]
    seed: String,
    /// Samples per set.
    #[arg(long)]
    count: Option<usize>,
    /// Bytes per sample, a multiple of 16.
    #[arg(long, default_value_t = DEFAULT_LENGTH)]
    length: usize,
    /// Use 10^6 samples per set unless --count is given.
    #[arg(long)]
    paper_scale: bool,
    /// AES key size: 128 or 256.
    #[arg(long, default_value = "128", value_parser = parse_key_size)]
    key_bits: KeySize,
}

impl CorpusArgs {
    fn master_seed(&self) -> Result<[u8; 32]> {
        parse_seed(&self.seed)
    }

    fn count(&self) -> usize {
        self.count.unwrap_or(if self.paper_scale { PAPER_COUNT } else { DEFAULT_COUNT })
    }

    fn plan(&self) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::new(self.master_seed()?);
        plan.corpus.count = self.count();
        plan.corpus.length = self.length;
        plan.corpus.key_size = self.key_bits;
        Ok(plan)
    }
}

fn parse_seed(s: &str) -> Result<[u8; 32]> {
    if s.len() == 64 {
        if let Ok(bytes) = hex::decode(s) {
            return Ok(bytes.try_into().expect("64 hex digits"));
        }
    }
    s.parse::<u64>()
        .map(seed_from_u64)
        .map_err(|_| usage(format!("--seed must be a decimal u64 or 64 hex digits, got {s:?}")))
}

fn parse_key_size(s: &str) -> std::result::Result<KeySize, String> {
    let bits: u32 = s.parse().map_err(|e| format!("{e}"))?;
    KeySize::from_bits(bits).map_err(|e| e.to_string())
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not strictly between 0 and 1"))
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, default_value_t = CipherMode::Ctr)]
    mode: CipherMode,
    /// Draw plaintexts from the OS CSPRNG instead of the seeded stream.
    #[arg(long)]
    os_entropy: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// One corpus file (unlabelled) or two (labelled 0 and 1).
    #[arg(required = true, num_args = 1..=2)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = FeatureKind::Ratio)]
    feature_kind: FeatureKind,
    /// `.csv` or `.bin` (binary with a JSON sidecar).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Repeatable; all modes when omitted.
    #[arg(long)]
    mode: Vec<CipherMode>,
    #[arg(long, default_value_t = FeatureKind::Ratio)]
    feature_kind: FeatureKind,
    #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = unit_interval)]
    alpha: f64,
    /// Judge each feature at alpha / 16.
    #[arg(long)]
    bonferroni: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labelled feature file (`.csv` or `.bin`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = ModelKind::Rf)]
    model: ModelKind,
    #[arg(long, default_value_t = DEFAULT_SPLIT, value_parser = unit_interval)]
    split: f64,
    /// Split and model seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Model JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Evaluate only the test side of this split; the whole file otherwise.
    #[arg(long, value_parser = unit_interval)]
    split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Repeatable; all modes when omitted.
    #[arg(long)]
    mode: Vec<CipherMode>,
    /// Repeatable; all models when omitted.
    #[arg(long)]
    model: Vec<ModelKind>,
    #[arg(long, default_value_t = FeatureKind::Ratio)]
    feature_kind: FeatureKind,
    #[arg(long, default_value_t = DEFAULT_SPLIT, value_parser = unit_interval)]
    split: f64,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    repetitions: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = unit_interval)]
    alpha: f64,
    /// Exit 4 unless every cell lies in its null interval and the control separates.
    #[arg(long)]
    check: bool,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcapArgs {
    /// Capture labelled 0.
    class_a: PathBuf,
    /// Capture labelled 1.
    class_b: PathBuf,
    #[arg(long)]
    model: Vec<ModelKind>,
    #[arg(long, default_value_t = FeatureKind::Ratio)]
    feature_kind: FeatureKind,
    #[arg(long, default_value_t = DEFAULT_SPLIT, value_parser = unit_interval)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every payload instead of downsampling the larger class.
    #[arg(long)]
    no_balance: bool,
    /// Permute labels at random: a no-signal control.
    #[arg(long)]
    shuffle_labels: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    input: PathBuf,
}

fn models_or_all(kinds: &[ModelKind], seed: u64) -> Vec<ModelSpec> {
    let kinds = if kinds.is_empty() { &ModelKind::ALL[..] } else { kinds };
    kinds.iter().map(|&k| ModelSpec::default_for(k, seed)).collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_features(path: &Path) -> Result<(FeatureMatrix, Option<Vec<u8>>)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let (_, m, labels) = read_features_bin(path)?;
            Ok((m, labels))
        }
        _ => Ok(read_features_csv(path)?),
    }
}

fn load_labelled(path: &Path) -> Result<LabeledDataset> {
    let (m, labels) = load_features(path)?;
    let labels = labels.with_context(|| format!("{} has no label column", path.display()))?;
    Ok(LabeledDataset::new(m, labels)?)
}

fn gen(args: GenArgs) -> Result<()> {
    let mut spec = args.corpus.plan()?.corpus;
    spec.mode = args.mode;
    if args.os_entropy {
        spec.entropy = EntropySource::OsEntropy;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let corpora = build_corpora(&spec)?;
    for set in [&gen_random_plaintexts(&spec)?, &gen_zero_plaintexts(&spec)?] {
        println!("{}", write_corpus(set, &args.out)?.display());
    }
    for name in [SetName::R1, SetName::R3, SetName::Z1, SetName::Z3] {
        let set = corpora.get(name).expect("encrypted set");
        println!("{}", write_corpus(set, &args.out)?.display());
    }
    Ok(())
}

fn features(args: FeaturesArgs) -> Result<()> {
    let mut matrix: Option<FeatureMatrix> = None;
    let mut labels = Vec::new();
    for (label, input) in args.inputs.iter().enumerate() {
        let (_, samples) = read_corpus(input)?;
        let m = featurize_payloads(samples.iter().map(|s| s.bytes.as_slice()), args.feature_kind)
            .with_context(|| format!("featurizing {}", input.display()))?;
        labels.extend(std::iter::repeat_n(label as u8, m.n_rows()));
        matrix = Some(match matrix {
            None => m,
            Some(prev) => prev.vstack(&m)?,
        });
    }
    let matrix = matrix.expect("at least one input");
    let labels = (args.inputs.len() == 2).then_some(labels.as_slice());
    match args.out.extension().and_then(|e| e.to_str()) {
        Some("bin") => {
            let source = args.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
            write_features_bin(&args.out, &matrix, labels, args.feature_kind, &source)?
        }
        Some("csv") => write_features_csv(&args.out, &matrix, labels)?,
        _ => return Err(usage("--out must end in .csv or .bin")),
    }
    println!("{} rows → {}", matrix.n_rows(), args.out.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let mut plan = args.corpus.plan()?;
    if !args.mode.is_empty() {
        plan.modes = args.mode;
    }
    plan.feature_kind = args.feature_kind;
    plan.alpha = args.alpha;
    plan.bonferroni = args.bonferroni;
    plan.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_statistics(&plan)?;
    print!("{}", report.render());
    if let Some(out) = args.out {
        write_json(&out, &report)?;
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let data = load_labelled(&args.data)?;
    let mut spec = ModelSpec::default_for(args.model, args.seed);
    match &mut spec {
        ModelSpec::Dt(p) => {
            if let Some(d) = args.max_depth {
                p.max_depth = d;
            }
        }
        ModelSpec::Rf(p) => {
            if let Some(t) = args.trees {
                p.n_trees = t;
            }
            if let Some(d) = args.max_depth {
                p.tree.max_depth = d;
            }
            p.features_per_split = p.features_per_split.min(data.n_features());
        }
        ModelSpec::Knn(p) => {
            if let Some(k) = args.k {
                p.k = k;
            }
        }
    }
    let split = stratified_split(&data, args.split, args.seed)?;
    let model = fit(&spec, &split.train)?;
    let cm = evaluate(&model, &split.test)?;
    save_model(&args.out, &spec, &model)?;
    println!(
        "{} trained on {} rows, held-out accuracy {:.4} on {} rows{}",
        spec.kind(),
        split.train.len(),
        cm.accuracy(),
        split.test.len(),
        if model.degenerate() { " (degenerate: predicts one class)" } else { "" }
    );
    print!("{}", cm.render());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let file = load_model(&args.model)?;
    let data = load_labelled(&args.data)?;
    let test = match args.split {
        Some(ratio) => stratified_split(&data, ratio, args.seed)?.test,
        None => data,
    };
    let cm = evaluate(&file.model, &test)?;
    println!("{} accuracy {:.4} on {} rows", file.spec.kind(), cm.accuracy(), test.len());
    print!("{}", cm.render());
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut plan = args.corpus.plan()?;
    if !args.mode.is_empty() {
        plan.modes = args.mode;
    }
    plan.models = models_or_all(&args.model, 0);
    plan.feature_kind = args.feature_kind;
    plan.split_ratio = args.split;
    plan.repetitions = args.repetitions;
    plan.alpha = args.alpha;
    plan.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_with_control(&plan)?;
    print!("{}", report.render());
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    if args.check {
        let violations = report.null_violations().len();
        let weak: Vec<_> = report.controls.iter().filter(|c| c.accuracy < 0.99).collect();
        if violations > 0 || !weak.is_empty() {
            return Err(CheckFailed(format!(
                "check failed: {violations} cell(s) outside the null interval, {} control model(s) below 0.99",
                weak.len()
            ))
            .into());
        }
        println!("check passed");
    }
    Ok(())
}

fn pcap(args: PcapArgs) -> Result<()> {
    let options = PcapOptions {
        feature_kind: args.feature_kind,
        balance: !args.no_balance,
        split_ratio: args.split,
        seed: args.seed,
        shuffle_labels: args.shuffle_labels,
    };
    let models = models_or_all(&args.model, args.seed);
    let report = run_pcap_pipeline(&args.class_a, &args.class_b, &models, &options)?;
    print!("{}", report.render());
    if let Some(out) = args.out {
        write_json(&out, &report)?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).with_context(|| format!("{} is not JSON", args.input.display()))?;
    let text = if value.get("cells").is_some() && value.get("aggregates").is_some() {
        let r: ExperimentReport = serde_json::from_value(value)?;
        if r.content_digest != r.compute_digest() {
            eprintln!("warning: content digest does not match the report body");
        }
        r.render()
    } else if value.get("modes").is_some() {
        serde_json::from_value::<StatisticsReport>(value)?.render()
    } else if value.get("class_a").is_some() {
        serde_json::from_value::<PcapReport>(value)?.render()
    } else {
        anyhow::bail!("{}: not an experiment, statistics or pcap report", args.input.display());
    };
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Features(a) => features(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
        Command::Pcap(a) => pcap(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else if e.downcast_ref::<CheckFailed>().is_some() {
                ExitCode::from(EXIT_CHECK)
            } else {
                ExitCode::from(EXIT_DATA)
            }
        }
    }
}
