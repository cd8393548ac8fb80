//! Descriptive statistics, the Mann-Whitney U test and binomial null intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Largest `n1 * n2` for which [`exact_p_value`] will build the U distribution.
pub const EXACT_LIMIT: usize = 10_000;

/// Column-wise mean, population standard deviation, minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub n: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn summarize(matrix: &FeatureMatrix) -> Result<FeatureSummary> {
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot summarize an empty matrix"));
    }
    let cols = matrix.n_cols();
    let mut mean = vec![0.0; cols];
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    for row in matrix.rows() {
        for j in 0..cols {
            mean[j] += row[j];
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // Two-pass variance; clamp the mean into [min, max] against rounding.
    let mut var = vec![0.0; cols];
    for row in matrix.rows() {
        for j in 0..cols {
            let d = row[j] - mean[j];
            var[j] += d * d;
        }
    }
    for j in 0..cols {
        mean[j] = mean[j].clamp(min[j], max[j]);
    }
    let std = var.iter().map(|v| (v / n as f64).sqrt()).collect();
    Ok(FeatureSummary {
        n,
        mean,
        std,
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwTestResult {
    pub u1: f64,
    pub u2: f64,
    pub z: f64,
    pub p: f64,
    pub n1: usize,
    pub n2: usize,
    pub significant: bool,
    /// Every observation in both groups was identical; `p` is forced to 1.
    pub degenerate: bool,
}

/// Midranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        let t = (end - start) as f64;
        ties += t * t * t - t;
        start = end;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test, normal approximation with tie and
/// continuity corrections.
pub fn mann_whitney(a: &[f64], b: &[f64], alpha: f64) -> Result<MwTestResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("Mann-Whitney needs at least one value per group"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("Mann-Whitney input contains NaN"));
    }
    let mut all = Vec::with_capacity(n1 + n2);
    all.extend_from_slice(a);
    all.extend_from_slice(b);
    let (ranks, ties) = midranks(&all);

    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - f1 * (f1 + 1.0) / 2.0;
    let u2 = f1 * f2 - u1;

    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)).max(1.0));
    if var <= 0.0 {
        return Ok(MwTestResult {
            u1,
            u2,
            z: 0.0,
            p: 1.0,
            n1,
            n2,
            significant: false,
            degenerate: true,
        });
    }
    let sd = var.sqrt();
    // |u1 - mu| == |u2 - mu|; computing it from the smaller U keeps it symmetric bit-for-bit.
    let dev = mu - u1.min(u2);
    let corrected = (dev - 0.5).max(0.0);
    let z = (corrected / sd).copysign(u1 - mu);
    let p = two_sided_normal_p(corrected / sd);
    Ok(MwTestResult {
        u1,
        u2,
        z,
        p,
        n1,
        n2,
        significant: p < alpha,
        degenerate: false,
    })
}

fn two_sided_normal_p(abs_z: f64) -> f64 {
    erfc(abs_z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Null distribution of U for tie-free samples: `P(U = u)` for `u in 0..=n1*n2`.
///
/// The counts are the coefficients of the Gaussian binomial
/// `[n1 + n2 choose n1]_q`, built one factor at a time.
pub fn exact_u_distribution(n1: usize, n2: usize) -> Result<Vec<f64>> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("exact distribution needs n1, n2 >= 1"));
    }
    if n1 * n2 > EXACT_LIMIT {
        return Err(Error::invalid(format!(
            "exact distribution limited to n1*n2 <= {EXACT_LIMIT}, got {}",
            n1 * n2
        )));
    }
    let max_u = n1 * n2;
    let mut c = vec![0.0f64; max_u + 1];
    c[0] = 1.0;
    for i in 1..=n1 {
        // times (1 - q^(n2 + i))
        let m = n2 + i;
        for k in (m..=max_u).rev() {
            c[k] -= c[k - m];
        }
        // divided by (1 - q^i)
        for k in i..=max_u {
            c[k] += c[k - i];
        }
    }
    let total: f64 = c.iter().sum();
    Ok(c.into_iter().map(|x| x.max(0.0) / total).collect())
}

/// Exact two-sided p-value: `P(|U - mu| >= |u - mu|)` under the null, no ties.
pub fn exact_p_value(u: f64, n1: usize, n2: usize) -> Result<f64> {
    let dist = exact_u_distribution(n1, n2)?;
    let mu = (n1 * n2) as f64 / 2.0;
    let dev = (u - mu).abs();
    let p: f64 = dist
        .iter()
        .enumerate()
        .filter(|(k, _)| (*k as f64 - mu).abs() >= dev - 1e-9)
        .map(|(_, p)| p)
        .sum();
    Ok(p.min(1.0))
}

/// Per-feature Mann-Whitney outcomes for one two-group comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differentiation {
    pub alpha: f64,
    /// Level each test was actually judged at (alpha / k under Bonferroni).
    pub effective_alpha: f64,
    pub bonferroni: bool,
    pub tests: Vec<MwTestResult>,
    pub significant: usize,
    pub rate: f64,
}

/// Fraction of columns whose Mann-Whitney test rejects at `alpha`.
pub fn differentiation(
    a: &FeatureMatrix,
    b: &FeatureMatrix,
    alpha: f64,
    bonferroni: bool,
) -> Result<Differentiation> {
    if a.n_cols() != b.n_cols() {
        return Err(Error::invalid(format!(
            "column counts differ: {} vs {}",
            a.n_cols(),
            b.n_cols()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let k = a.n_cols();
    let effective_alpha = if bonferroni { alpha / k as f64 } else { alpha };
    let tests: Vec<MwTestResult> = (0..k)
        .into_par_iter()
        .map(|j| mann_whitney(&a.column(j), &b.column(j), effective_alpha))
        .collect::<Result<_>>()?;
    let significant = tests.iter().filter(|t| t.significant).count();
    Ok(Differentiation {
        alpha,
        effective_alpha,
        bonferroni,
        tests,
        significant,
        rate: significant as f64 / k as f64,
    })
}

pub fn differentiation_rate(a: &FeatureMatrix, b: &FeatureMatrix, alpha: f64) -> Result<f64> {
    differentiation(a, b, alpha, false).map(|d| d.rate)
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
}

/// Central acceptance region `[lo, hi]` (in successes) of Binomial(n, p)
/// holding at least `confidence` of the mass, each tail at most `(1 - confidence) / 2`.
pub fn binomial_acceptance_region(n: u64, p: f64, confidence: f64) -> (u64, u64) {
    let tail = (1.0 - confidence) / 2.0;
    let pmf: Vec<f64> = (0..=n).map(|k| binomial_pmf(n, k, p)).collect();
    let mut lo = 0;
    let mut acc = 0.0;
    for (k, m) in pmf.iter().enumerate() {
        if acc + m > tail {
            lo = k as u64;
            break;
        }
        acc += m;
    }
    let mut hi = n;
    acc = 0.0;
    for (k, m) in pmf.iter().enumerate().rev() {
        if acc + m > tail {
            hi = k as u64;
            break;
        }
        acc += m;
    }
    (lo, hi)
}

/// Accuracy interval a no-skill classifier stays inside with probability `confidence`
/// on a test set of `n` items.
pub fn null_accuracy_interval(n: usize, confidence: f64) -> (f64, f64) {
    let (lo, hi) = binomial_acceptance_region(n as u64, 0.5, confidence);
    (lo as f64 / n as f64, hi as f64 / n as f64)
}

/// Smallest `c` with `P(X <= c) >= confidence` for X ~ Binomial(n, p).
pub fn binomial_upper_bound(n: u64, p: f64, confidence: f64) -> u64 {
    let mut acc = 0.0;
    for k in 0..=n {
        acc += binomial_pmf(n, k, p);
        if acc >= confidence {
            return k;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_single_row() {
        let m = FeatureMatrix::from_rows(&[[0.5, 0.25, 1.0]]).unwrap();
        let s = summarize(&m).unwrap();
        assert_eq!(s.mean, vec![0.5, 0.25, 1.0]);
        assert_eq!(s.std, vec![0.0; 3]);
        assert_eq!(s.min, s.max);
    }

    #[test]
    fn summary_two_point() {
        let m = FeatureMatrix::from_rows(&[[0.25, 0.25], [0.75, 0.75]]).unwrap();
        let s = summarize(&m).unwrap();
        assert_eq!(s.mean, vec![0.5, 0.5]);
        assert_eq!(s.std, vec![0.25, 0.25]);
        assert!(summarize(&FeatureMatrix::new(2, vec![]).unwrap()).is_err());
    }

    #[test]
    fn identical_groups_split_u_evenly() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney(&a, &a, 0.05).unwrap();
        assert_eq!((r.u1, r.u2), (8.0, 8.0));
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn complete_separation() {
        let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.05).unwrap();
        assert_eq!((r.u1, r.u2), (0.0, 9.0));
        assert!(r.z < 0.0);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let r = mann_whitney(&[2.0; 5], &[2.0; 7], 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
        assert_eq!(r.u1 + r.u2, 35.0);
    }

    #[test]
    fn ties_get_midranks() {
        let (ranks, ties) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(ranks, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, 6.0);
    }

    #[test]
    fn empty_group_rejected() {
        assert!(mann_whitney(&[], &[1.0], 0.05).is_err());
        assert!(mann_whitney(&[f64::NAN], &[1.0], 0.05).is_err());
    }

    /// Enumerates every n1-subset of ranks 1..=n1+n2.
    fn brute_force_distribution(n1: usize, n2: usize) -> Vec<f64> {
        let n = n1 + n2;
        let mut counts = vec![0u64; n1 * n2 + 1];
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
            counts[rank_sum - n1 * (n1 + 1) / 2] += 1;
        }
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    #[test]
    fn exact_distribution_matches_enumeration() {
        for n1 in 1..=7 {
            for n2 in 1..=7 {
                let fast = exact_u_distribution(n1, n2).unwrap();
                let slow = brute_force_distribution(n1, n2);
                for (x, y) in fast.iter().zip(&slow) {
                    assert!((x - y).abs() < 1e-12, "n1={n1} n2={n2}");
                }
            }
        }
        assert!(exact_u_distribution(101, 100).is_err());
    }

    #[test]
    fn twenty_by_twenty_against_exact() {
        // Tie-free values from a fixed LCG.
        let mut s = 12345u64;
        let mut draw = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for shift in [0.0, 0.1, 0.3] {
            let a: Vec<f64> = (0..20).map(|_| draw()).collect();
            let b: Vec<f64> = (0..20).map(|_| draw() + shift).collect();
            let r = mann_whitney(&a, &b, 0.05).unwrap();
            let exact = exact_p_value(r.u1, 20, 20).unwrap();
            assert!((r.p - exact).abs() < 0.02, "approx {} exact {exact}", r.p);
        }
    }

    #[test]
    fn binomial_regions() {
        assert_eq!(binomial_acceptance_region(5000, 0.5, 0.999), (2384, 2616));
        assert_eq!(binomial_upper_bound(16, 0.05, 0.999), 4);
        let (lo, hi) = null_accuracy_interval(5000, 0.999);
        assert_eq!((lo, hi), (0.4768, 0.5232));
    }

    #[test]
    fn differentiation_of_identical_matrices_is_zero() {
        let m = FeatureMatrix::from_rows(&[[0.1, 0.2], [0.3, 0.1], [0.2, 0.5]]).unwrap();
        assert_eq!(differentiation_rate(&m, &m, 0.05).unwrap(), 0.0);
        let other = FeatureMatrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        assert!(differentiation_rate(&m, &other, 0.05).is_err());
    }

    #[test]
    fn bonferroni_divides_alpha() {
        let a = FeatureMatrix::from_rows(&(0..30).map(|i| [i as f64, 0.0]).collect::<Vec<_>>()).unwrap();
        let b = FeatureMatrix::from_rows(&(0..30).map(|i| [i as f64 + 9.0, 0.0]).collect::<Vec<_>>()).unwrap();
        let plain = differentiation(&a, &b, 0.05, false).unwrap();
        let corrected = differentiation(&a, &b, 0.05, true).unwrap();
        assert_eq!(corrected.effective_alpha, 0.025);
        assert!(plain.tests[0].p < 0.05 && plain.significant == 1);
        assert!(corrected.significant <= plain.significant);
    }

    proptest! {
        #[test]
        fn u_identity_and_swap_symmetry(a in proptest::collection::vec(0u8..20, 1..40),
                                        b in proptest::collection::vec(0u8..20, 1..40)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney(&a, &b, 0.05).unwrap();
            let ba = mann_whitney(&b, &a, 0.05).unwrap();
            prop_assert_eq!(ab.u1 + ab.u2, (a.len() * b.len()) as f64);
            prop_assert_eq!(ab.u1, ba.u2);
            prop_assert_eq!(ab.u2, ba.u1);
            prop_assert_eq!(ab.p, ba.p);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }

        #[test]
        fn large_shift_is_significant(a in proptest::collection::vec(0.0f64..1.0, 8..30)) {
            let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
            let r = mann_whitney(&a, &b, 0.05).unwrap();
            prop_assert!(r.p < 0.01);
        }
    }
}
