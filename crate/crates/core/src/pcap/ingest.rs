use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::extract::PayloadRecord;
use crate::error::{Error, Result};
use crate::features::{featurize_payloads, FeatureKind};
use crate::learn::LabeledDataset;

/// Indices kept after (optionally) downsampling to `target`, in input order.
fn keep(n: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if target >= n {
        return (0..n).collect();
    }
    let mut idx = sample(rng, n, target).into_vec();
    idx.sort_unstable();
    idx
}

/// Featurizes both payload lists into one dataset, class A labelled 0 and class B 1.
///
/// With `balance`, the larger class is downsampled uniformly at random
/// (seeded) to the size of the smaller one. Surviving rows keep their input
/// order, A rows first.
pub fn build_labeled_dataset(
    class_a: &[PayloadRecord],
    class_b: &[PayloadRecord],
    kind: FeatureKind,
    balance: bool,
    seed: u64,
) -> Result<LabeledDataset> {
    if class_a.is_empty() || class_b.is_empty() {
        return Err(Error::invalid(format!(
            "both classes need payloads, got {} and {}",
            class_a.len(),
            class_b.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = if balance {
        class_a.len().min(class_b.len())
    } else {
        usize::MAX
    };
    let keep_a = keep(class_a.len(), target, &mut rng);
    let keep_b = keep(class_b.len(), target, &mut rng);

    let a = featurize_payloads(keep_a.iter().map(|&i| class_a[i].payload.as_slice()), kind)?;
    let b = featurize_payloads(keep_b.iter().map(|&i| class_b[i].payload.as_slice()), kind)?;
    Ok(LabeledDataset::from_classes(&a, &b)?
        .with_meta("feature_kind", kind.to_string())
        .with_meta("balanced", balance)
        .with_meta("seed", seed)
        .with_meta("class_a_available", class_a.len())
        .with_meta("class_b_available", class_b.len())
        .with_meta("class_a_rows", keep_a.len())
        .with_meta("class_b_rows", keep_b.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::FiveTuple;
    use std::net::{IpAddr, Ipv4Addr};

    fn records(n: usize, byte: u8) -> Vec<PayloadRecord> {
        let t = FiveTuple {
            src: IpAddr::V4(Ipv4Addr::LOCALHOST),
            dst: IpAddr::V4(Ipv4Addr::LOCALHOST),
            src_port: 1,
            dst_port: 2,
            protocol: 6,
        };
        (0..n)
            .map(|i| PayloadRecord {
                payload: vec![byte, i as u8, (i >> 8) as u8],
                five_tuple: t,
                packet_index: i,
            })
            .collect()
    }

    #[test]
    fn balancing_uses_minimum_class_size() {
        let d = build_labeled_dataset(&records(4000, 0x11), &records(3252, 0xee), FeatureKind::Ratio, true, 9).unwrap();
        assert_eq!(d.class_counts(), [3252, 3252]);
        assert!(d.labels[..3252].iter().all(|&l| l == 0));
        let again = build_labeled_dataset(&records(4000, 0x11), &records(3252, 0xee), FeatureKind::Ratio, true, 9).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn unbalanced_keeps_everything() {
        let d = build_labeled_dataset(&records(30, 1), &records(10, 2), FeatureKind::Count, false, 0).unwrap();
        assert_eq!(d.class_counts(), [30, 10]);
        assert_eq!(d.meta["balanced"], false);
        assert_eq!(d.meta["class_a_rows"], 30);
    }

    #[test]
    fn empty_class_rejected() {
        assert!(build_labeled_dataset(&[], &records(3, 0), FeatureKind::Ratio, true, 0).is_err());
    }
}
