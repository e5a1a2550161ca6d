//! Statistical helpers for seeded tests.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness-of-fit statistic against expected probabilities.
/// Returns `(statistic, degrees_of_freedom)`.
pub fn chi2_gof(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = n as f64 * p;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else {
            assert_eq!(c, 0, "observed outcome with zero probability");
        }
    }
    (stat, cells - 1)
}

/// Two-sample chi-squared statistic over shared cells.
pub fn chi2_two_sample(a: &[u64], b: &[u64]) -> (f64, usize) {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = x + y;
        if tot > 0 {
            stat += (ka * x as f64 - kb * y as f64).powi(2) / tot as f64;
            cells += 1;
        }
    }
    (stat, cells - 1)
}

/// Upper-tail p-value of a chi-squared statistic.
pub fn chi2_pvalue(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

/// Histogram of hashable outcomes aligned on a key order; returns the keys
/// and one count row per input map.
pub fn aligned_counts<K: Eq + Hash + Clone + Ord>(
    maps: &[&HashMap<K, u64>],
) -> (Vec<K>, Vec<Vec<u64>>) {
    let mut keys: Vec<K> = maps
        .iter()
        .flat_map(|m| m.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.sort();
    let rows = maps
        .iter()
        .map(|m| keys.iter().map(|k| *m.get(k).unwrap_or(&0)).collect())
        .collect();
    (keys, rows)
}

/// Largest deviation from expectation in binomial sigma units.
pub fn max_multinomial_sigma(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            if sd == 0.0 {
                0.0
            } else {
                (c as f64 - e).abs() / sd
            }
        })
        .fold(0.0, f64::max)
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
