use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use layerlab_bench::{noisy_dataset, random_bytes};
use layerlab_core::cipher::{encrypt_in_place, Aes};
use layerlab_core::features::{featurize_payloads, hex_ratios};
use layerlab_core::forge::{build_corpora, seed_from_u64};
use layerlab_core::learn::{fit, predict, ForestParams, KnnParams, TreeParams};
use layerlab_core::{BlockKey, CipherMode, CorpusSpec, FeatureKind, InitVector, ModelSpec};

fn aes_modes(c: &mut Criterion) {
    let key = BlockKey::from_slice(&[7u8; 16]).unwrap();
    let aes = Aes::new(&key);
    let iv = InitVector([3u8; 16]);
    let plain = random_bytes(4096, 1);
    let mut group = c.benchmark_group("aes128");
    group.throughput(Throughput::Bytes(plain.len() as u64));
    for mode in CipherMode::ALL {
        group.bench_function(BenchmarkId::from_parameter(mode), |b| {
            let mut buf = plain.clone();
            b.iter(|| encrypt_in_place(black_box(&mut buf), &iv, &aes, mode).unwrap())
        });
    }
    group.finish();
}

fn corpora(c: &mut Criterion) {
    let spec = CorpusSpec::new(1_000, CipherMode::Ctr, seed_from_u64(2));
    let mut group = c.benchmark_group("corpora");
    group.sample_size(10);
    group.throughput(Throughput::Elements(spec.count as u64));
    group.bench_function("build_1000x512", |b| b.iter(|| build_corpora(black_box(&spec)).unwrap()));
    group.finish();
}

fn features(c: &mut Criterion) {
    let payload = random_bytes(512, 3);
    c.bench_function("hex_ratios_512", |b| b.iter(|| hex_ratios(black_box(&payload)).unwrap()));
    let payloads: Vec<Vec<u8>> = (0..1_000).map(|i| random_bytes(512, i)).collect();
    c.bench_function("featurize_1000x512", |b| {
        b.iter(|| featurize_payloads(payloads.iter().map(|p| p.as_slice()), FeatureKind::Ratio).unwrap())
    });
}

fn learners(c: &mut Criterion) {
    let train = noisy_dataset(5_000, 4);
    let test = noisy_dataset(1_000, 5);
    let mut group = c.benchmark_group("learners");
    group.sample_size(10);
    group.bench_function("dt_fit_5000", |b| {
        b.iter(|| fit(&ModelSpec::Dt(TreeParams::default()), black_box(&train)).unwrap())
    });
    let rf = ModelSpec::Rf(ForestParams { n_trees: 10, ..ForestParams::default() });
    group.bench_function("rf10_fit_5000", |b| b.iter(|| fit(&rf, black_box(&train)).unwrap()));
    let knn = fit(&ModelSpec::Knn(KnnParams::default()), &train).unwrap();
    group.bench_function("knn5_predict_1000_of_5000", |b| {
        b.iter(|| predict(&knn, black_box(&test.features)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, aes_modes, corpora, features, learners);
criterion_main!(benches);
