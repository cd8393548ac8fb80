//! Hex-digit frequency features.
//!
//! A payload of `n` bytes is read as `2n` hex digits (high nibble first). The
//! COUNT vector holds how often each digit `0..=f` occurs; the RATIO vector
//! divides those counts by `2n`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_DIGITS: usize = 16;

pub const FEATURE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureKind {
    Count,
    #[default]
    Ratio,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Count => "COUNT",
            FeatureKind::Ratio => "RATIO",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(FeatureKind::Count),
            "ratio" => Ok(FeatureKind::Ratio),
            _ => Err(Error::invalid(format!("unknown feature kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; N_DIGITS],
    pub kind: FeatureKind,
    /// Number of hex digits in the source payload (twice its byte length).
    pub source_length: usize,
}

/// Column names `f0` … `ff`.
pub fn column_names() -> Vec<String> {
    (0..N_DIGITS).map(|d| format!("f{d:x}")).collect()
}

fn nibble_counts(payload: &[u8]) -> Result<[u64; N_DIGITS]> {
    if payload.is_empty() {
        return Err(Error::invalid("cannot featurize an empty payload"));
    }
    let mut counts = [0u64; N_DIGITS];
    for &b in payload {
        counts[(b >> 4) as usize] += 1;
        counts[(b & 0x0f) as usize] += 1;
    }
    Ok(counts)
}

pub fn hex_counts(payload: &[u8]) -> Result<FeatureVector> {
    let counts = nibble_counts(payload)?;
    Ok(FeatureVector {
        values: counts.map(|c| c as f64),
        kind: FeatureKind::Count,
        source_length: 2 * payload.len(),
    })
}

pub fn hex_ratios(payload: &[u8]) -> Result<FeatureVector> {
    let counts = nibble_counts(payload)?;
    let total = (2 * payload.len()) as f64;
    Ok(FeatureVector {
        values: counts.map(|c| c as f64 / total),
        kind: FeatureKind::Ratio,
        source_length: 2 * payload.len(),
    })
}

pub fn featurize(payload: &[u8], kind: FeatureKind) -> Result<FeatureVector> {
    match kind {
        FeatureKind::Count => hex_counts(payload),
        FeatureKind::Ratio => hex_ratios(payload),
    }
}

/// Dense row-major matrix of `f64` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if n_cols == 0 || !data.len().is_multiple_of(n_cols) {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of {n_cols} columns",
                data.len()
            )));
        }
        Ok(FeatureMatrix { n_cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(N_DIGITS);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        FeatureMatrix::new(n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the listed rows in the listed order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n_cols: self.n_cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.n_cols != other.n_cols {
            return Err(Error::invalid(format!(
                "cannot stack {} columns onto {}",
                other.n_cols, self.n_cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FeatureMatrix {
            n_cols: self.n_cols,
            data,
        })
    }
}

/// Featurizes every payload, one row per payload, order preserved.
pub fn featurize_payloads<'a, I>(payloads: I, kind: FeatureKind) -> Result<FeatureMatrix>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let payloads: Vec<&[u8]> = payloads.into_iter().collect();
    if payloads.is_empty() {
        return Err(Error::invalid("cannot featurize an empty corpus"));
    }
    let rows: Vec<[f64; N_DIGITS]> = payloads
        .par_iter()
        .map(|p| featurize(p, kind).map(|v| v.values))
        .collect::<Result<_>>()?;
    FeatureMatrix::from_rows(&rows)
}

pub fn featurize_corpus(set: &crate::forge::CorpusSet, kind: FeatureKind) -> Result<FeatureMatrix> {
    featurize_payloads(set.payloads(), kind)
}

/// Writes a CSV with header `f0,…,ff[,label]`.
pub fn write_features_csv(path: &Path, matrix: &FeatureMatrix, labels: Option<&[u8]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != matrix.n_rows() {
            return Err(Error::invalid("label count does not match row count"));
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header: Vec<String> = if matrix.n_cols() == N_DIGITS {
        column_names()
    } else {
        (0..matrix.n_cols()).map(|j| format!("x{j}")).collect()
    };
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, row) in matrix.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a feature CSV. A trailing `label` column, if present, is returned separately.
pub fn read_features_csv(path: &Path) -> Result<(FeatureMatrix, Option<Vec<u8>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let has_label = header.iter().next_back() == Some("label");
    let n_cols = header.len() - has_label as usize;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for field in rec.iter().take(n_cols) {
            data.push(field.trim().parse::<f64>().map_err(|e| {
                Error::invalid(format!("{}: row {i}: bad number {field:?}: {e}", path.display()))
            })?);
        }
        if has_label {
            let l = match rec.get(n_cols).map(str::trim) {
                Some("0") => 0,
                Some("1") => 1,
                other => {
                    return Err(Error::invalid(format!(
                        "{}: row {i}: label must be 0 or 1, got {other:?}",
                        path.display()
                    )))
                }
            };
            labels.push(l);
        }
    }
    let matrix = FeatureMatrix::new(n_cols, data)?;
    Ok((matrix, has_label.then_some(labels)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFileMeta {
    pub rows: usize,
    pub cols: usize,
    pub kind: FeatureKind,
    pub has_labels: bool,
    pub format_version: u32,
    pub source: String,
}

/// Compact binary: little-endian `f64` rows, then one byte per label if any.
/// Metadata goes to a JSON sidecar with the same stem.
pub fn write_features_bin(
    path: &Path,
    matrix: &FeatureMatrix,
    labels: Option<&[u8]>,
    kind: FeatureKind,
    source: &str,
) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.as_slice().len() * 8);
    for v in matrix.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(l) = labels {
        bytes.extend_from_slice(l);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = FeatureFileMeta {
        rows: matrix.n_rows(),
        cols: matrix.n_cols(),
        kind,
        has_labels: labels.is_some(),
        format_version: FEATURE_FORMAT_VERSION,
        source: source.to_string(),
    };
    let side = path.with_extension("json");
    fs::write(&side, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&side, e))
}

pub fn read_features_bin(path: &Path) -> Result<(FeatureFileMeta, FeatureMatrix, Option<Vec<u8>>)> {
    let side = path.with_extension("json");
    let meta: FeatureFileMeta =
        serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n_values = meta.rows * meta.cols;
    let expected = n_values * 8 + if meta.has_labels { meta.rows } else { 0 };
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "{}: {} bytes, sidecar implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[..n_values * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = meta.has_labels.then(|| bytes[n_values * 8..].to_vec());
    let matrix = FeatureMatrix::new(meta.cols, data)?;
    Ok((meta, matrix, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_bytes() {
        let v = hex_counts(&[0x00]).unwrap();
        assert_eq!(v.values[0], 2.0);
        assert_eq!(v.values[1..].iter().sum::<f64>(), 0.0);
        let v = hex_counts(&[0xab]).unwrap();
        assert_eq!((v.values[0xa], v.values[0xb]), (1.0, 1.0));
        assert_eq!(v.source_length, 2);
    }

    #[test]
    fn zero_payload() {
        let z = [0u8; 512];
        assert_eq!(hex_counts(&z).unwrap().values[0], 1024.0);
        let r = hex_ratios(&z).unwrap();
        assert_eq!(r.values[0], 1.0);
        assert!(r.values[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_of_each_digit() {
        let r = hex_ratios(&[0x01, 0x23, 0x45, 0x67, 0x89, 0xab, 0xcd, 0xef]).unwrap();
        assert!(r.values.iter().all(|&v| v == 1.0 / 16.0));
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(matches!(hex_counts(&[]), Err(Error::InvalidArgument(_))));
        assert!(hex_ratios(&[]).is_err());
        assert!(featurize_payloads(Vec::<&[u8]>::new(), FeatureKind::Ratio).is_err());
    }

    #[test]
    fn column_names_are_hex_digits() {
        let names = column_names();
        assert_eq!(names.first().unwrap(), "f0");
        assert_eq!(names[10], "fa");
        assert_eq!(names.last().unwrap(), "ff");
    }

    #[test]
    fn csv_and_bin_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let payloads: Vec<Vec<u8>> = (0..5u8).map(|i| vec![i.wrapping_mul(37); 48]).collect();
        let m = featurize_payloads(payloads.iter().map(Vec::as_slice), FeatureKind::Ratio).unwrap();
        let labels = vec![0, 1, 0, 1, 1];

        let csv_path = dir.path().join("f.csv");
        write_features_csv(&csv_path, &m, Some(&labels)).unwrap();
        let (back, l) = read_features_csv(&csv_path).unwrap();
        assert_eq!(back, m);
        assert_eq!(l.unwrap(), labels);

        let bin_path = dir.path().join("f.bin");
        write_features_bin(&bin_path, &m, None, FeatureKind::Ratio, "test").unwrap();
        let (meta, back, l) = read_features_bin(&bin_path).unwrap();
        assert_eq!((meta.rows, meta.cols), (5, 16));
        assert_eq!(back, m);
        assert!(l.is_none());
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut bytes in proptest::collection::vec(any::<u8>(), 1..200), seed in any::<u64>()) {
            let before = hex_ratios(&bytes).unwrap();
            let n = bytes.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                bytes.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(hex_ratios(&bytes).unwrap(), before);
        }

        #[test]
        fn counts_and_ratios_proportional(bytes in proptest::collection::vec(any::<u8>(), 1..600)) {
            let c = hex_counts(&bytes).unwrap();
            let r = hex_ratios(&bytes).unwrap();
            prop_assert_eq!(c.values.iter().sum::<f64>(), (2 * bytes.len()) as f64);
            for d in 0..N_DIGITS {
                prop_assert_eq!(r.values[d], c.values[d] / (2 * bytes.len()) as f64);
            }
        }
    }
}
