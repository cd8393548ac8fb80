//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use layerlab_core::{FeatureMatrix, LabeledDataset};

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random()).collect()
}

/// `rows` × 16 uniform features with a noisy linear boundary.
pub fn noisy_dataset(rows: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(rows * 16);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let row: Vec<f64> = (0..16).map(|_| rng.random()).collect();
        let noise: f64 = rng.random::<f64>() * 0.4 - 0.2;
        labels.push(u8::from(row[0] + row[5] + noise > 1.0));
        data.extend(row);
    }
    LabeledDataset::new(FeatureMatrix::new(16, data).unwrap(), labels).unwrap()
}
