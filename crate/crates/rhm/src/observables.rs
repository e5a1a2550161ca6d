//! Measurements on forward-backward trajectories: change spins, dynamical
//! correlations and susceptibility, per-layer reconstruction, rule-usage
//! statistics, token correlations of generated sets and copy detection.
//!
//! The correlation estimator follows the two-level definition: connected
//! correlations are computed within each start (over its trajectories) and
//! then averaged over starts. Batches must carry the same trajectory count
//! per start; ragged batches are rejected rather than reweighted.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grammar::{RuleSet, SampleTree, Symbol};

/// Change indicators: `+1` where the reconstruction differs from the
/// original, `-1` where it agrees.
pub type SpinField = Vec<i8>;

pub fn spin_field(x0: &[Symbol], xhat: &[Symbol]) -> Result<SpinField> {
    if x0.len() != xhat.len() {
        return Err(Error::LengthMismatch {
            expected: x0.len(),
            got: xhat.len(),
        });
    }
    Ok(x0
        .iter()
        .zip(xhat)
        .map(|(a, b)| if a == b { -1 } else { 1 })
        .collect())
}

/// Index into the packed upper triangle (including the diagonal).
#[inline]
fn tri_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * d - i * (i + 1) / 2 + j
}

/// Streaming builder of the averaged correlation table.
///
/// Accumulators merge associatively; merging in a fixed order keeps results
/// bit-reproducible under any parallel split of the starts.
#[derive(Clone, Debug)]
pub struct CorrelationAccumulator {
    d: usize,
    n_traj: Option<usize>,
    sum_c: Vec<f64>,
    per_start_radial: Vec<Vec<f64>>,
    per_start_sums: Vec<(f64, f64)>,
}

impl CorrelationAccumulator {
    pub fn new(d: usize) -> Self {
        CorrelationAccumulator {
            d,
            n_traj: None,
            sum_c: vec![0.0; d * (d + 1) / 2],
            per_start_radial: Vec::new(),
            per_start_sums: Vec::new(),
        }
    }

    fn check_batch(&mut self, n: usize, lens_ok: bool) -> Result<()> {
        if n < 2 {
            return Err(Error::InsufficientTrajectories(n));
        }
        if !lens_ok {
            return Err(Error::LengthMismatch {
                expected: self.d,
                got: usize::MAX,
            });
        }
        match self.n_traj {
            None => self.n_traj = Some(n),
            Some(k) if k != n => {
                return Err(Error::InvalidParams(format!(
                    "ragged batch: {k} trajectories per start expected, got {n}"
                )))
            }
            _ => {}
        }
        Ok(())
    }

    /// Adds one start given its spin trajectories (integer fast path).
    pub fn add_start_spins(&mut self, trajs: &[SpinField]) -> Result<()> {
        self.check_batch(trajs.len(), trajs.iter().all(|t| t.len() == self.d))?;
        let d = self.d;
        let n = trajs.len() as f64;
        let mut cross = vec![0i32; d * (d + 1) / 2];
        let mut sums = vec![0i32; d];
        for t in trajs {
            for i in 0..d {
                let si = t[i] as i32;
                sums[i] += si;
                let row = &mut cross[tri_index(d, i, i)..tri_index(d, i, d - 1) + 1];
                let tail = &t[i..];
                for (dst, &sj) in row.iter_mut().zip(tail) {
                    *dst += si * sj as i32;
                }
            }
        }
        let mut c = vec![0.0f64; d * (d + 1) / 2];
        for i in 0..d {
            let mi = sums[i] as f64 / n;
            for j in i..d {
                let mj = sums[j] as f64 / n;
                c[tri_index(d, i, j)] = cross[tri_index(d, i, j)] as f64 / n - mi * mj;
            }
        }
        self.push_start(c);
        Ok(())
    }

    /// Adds one start given continuous change magnitudes per site.
    pub fn add_start(&mut self, trajs: &[Vec<f64>]) -> Result<()> {
        self.check_batch(trajs.len(), trajs.iter().all(|t| t.len() == self.d))?;
        let d = self.d;
        let n = trajs.len() as f64;
        let mut cross = vec![0.0f64; d * (d + 1) / 2];
        let mut sums = vec![0.0f64; d];
        for t in trajs {
            for i in 0..d {
                let si = t[i];
                sums[i] += si;
                let row = &mut cross[tri_index(d, i, i)..tri_index(d, i, d - 1) + 1];
                for (dst, &sj) in row.iter_mut().zip(&t[i..]) {
                    *dst += si * sj;
                }
            }
        }
        let mut c = vec![0.0f64; d * (d + 1) / 2];
        for i in 0..d {
            let mi = sums[i] / n;
            for j in i..d {
                let mj = sums[j] / n;
                c[tri_index(d, i, j)] = cross[tri_index(d, i, j)] / n - mi * mj;
            }
        }
        self.push_start(c);
        Ok(())
    }

    fn push_start(&mut self, c: Vec<f64>) {
        let d = self.d;
        let mut radial = vec![0.0; d];
        for r in 0..d {
            let mut acc = 0.0;
            for i in 0..d - r {
                acc += c[tri_index(d, i, i + r)];
            }
            radial[r] = acc / (d - r) as f64;
        }
        let mut diag = 0.0;
        let mut all = 0.0;
        for i in 0..d {
            diag += c[tri_index(d, i, i)];
            for j in i..d {
                let x = c[tri_index(d, i, j)];
                all += if i == j { x } else { 2.0 * x };
            }
        }
        self.per_start_radial.push(radial);
        self.per_start_sums.push((all, diag));
        for (dst, src) in self.sum_c.iter_mut().zip(&c) {
            *dst += src;
        }
    }

    /// Associative merge; call in fixed start order for reproducibility.
    pub fn merge(mut self, other: CorrelationAccumulator) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::LengthMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        match (self.n_traj, other.n_traj) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::InvalidParams(format!(
                    "ragged batch: {a} vs {b} trajectories per start"
                )))
            }
            (None, b) => self.n_traj = b,
            _ => {}
        }
        for (dst, src) in self.sum_c.iter_mut().zip(&other.sum_c) {
            *dst += src;
        }
        self.per_start_radial.extend(other.per_start_radial);
        self.per_start_sums.extend(other.per_start_sums);
        Ok(self)
    }

    pub fn finish(self) -> Result<CorrelationTable> {
        let n = self.per_start_sums.len();
        if n == 0 {
            return Err(Error::InsufficientTrajectories(0));
        }
        let mut mean_c = self.sum_c;
        mean_c.iter_mut().for_each(|x| *x /= n as f64);
        Ok(CorrelationTable {
            d: self.d,
            n_starts: n,
            n_traj: self.n_traj.unwrap_or(0),
            mean_c,
            per_start_radial: self.per_start_radial,
            per_start_sums: self.per_start_sums,
        })
    }
}

/// Dynamical correlations averaged over starts.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    d: usize,
    n_starts: usize,
    n_traj: usize,
    /// Packed upper triangle of the start-averaged connected correlations.
    mean_c: Vec<f64>,
    per_start_radial: Vec<Vec<f64>>,
    per_start_sums: Vec<(f64, f64)>,
}

/// One radial bin of the averaged correlation function.
#[derive(Clone, Copy, Debug)]
pub struct RadialPoint {
    pub r: usize,
    /// Profile normalized by the on-site value `C(0)`.
    pub c_norm: f64,
    pub stderr_norm: f64,
    /// Raw averaged correlation at this distance.
    pub c_raw: f64,
    pub stderr_raw: f64,
    /// Index pairs entering the bin (per start).
    pub n_pairs: usize,
}

impl CorrelationTable {
    pub fn sites(&self) -> usize {
        self.d
    }

    pub fn starts(&self) -> usize {
        self.n_starts
    }

    pub fn trajectories_per_start(&self) -> usize {
        self.n_traj
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.mean_c[tri_index(self.d, a, b)]
    }

    /// Test helper: a table with a prescribed averaged matrix and no
    /// start-level bookkeeping.
    pub fn from_mean_matrix(d: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), d * d);
        let mut mean_c = vec![0.0; d * (d + 1) / 2];
        for i in 0..d {
            for j in i..d {
                mean_c[tri_index(d, i, j)] = dense[i * d + j];
            }
        }
        CorrelationTable {
            d,
            n_starts: 0,
            n_traj: 0,
            mean_c,
            per_start_radial: Vec::new(),
            per_start_sums: Vec::new(),
        }
    }

    /// Averaged profile over index distance; each unordered pair counted
    /// once, normalized by the on-site average.
    pub fn radial_profile(&self) -> Vec<RadialPoint> {
        let d = self.d;
        let starts = self.per_start_radial.len();
        let mut out = Vec::with_capacity(d);
        // mean over starts per distance
        let mut c0 = 0.0;
        for r in 0..d {
            let xs: Vec<f64> = self.per_start_radial.iter().map(|p| p[r]).collect();
            let (mean, se) = mean_stderr(&xs);
            if r == 0 {
                c0 = mean;
            }
            let scale = if c0 != 0.0 { c0 } else { 1.0 };
            out.push(RadialPoint {
                r,
                c_norm: mean / scale,
                stderr_norm: se / scale,
                c_raw: mean,
                stderr_raw: se,
                n_pairs: d - r,
            });
        }
        let _ = starts;
        out
    }

    /// Susceptibility: total correlation normalized by the autocorrelation,
    /// computed on the averaged table.
    pub fn susceptibility(&self) -> f64 {
        let d = self.d;
        let mut all = 0.0;
        let mut diag = 0.0;
        for i in 0..d {
            diag += self.mean_c[tri_index(d, i, i)];
            for j in i..d {
                let x = self.mean_c[tri_index(d, i, j)];
                all += if i == j { x } else { 2.0 * x };
            }
        }
        all / diag
    }

    /// Susceptibility with a leave-one-start-out jackknife error.
    pub fn susceptibility_jackknife(&self) -> (f64, f64) {
        let chi = self.susceptibility();
        let n = self.per_start_sums.len();
        if n < 2 {
            return (chi, 0.0);
        }
        let (tot_all, tot_diag) = self
            .per_start_sums
            .iter()
            .fold((0.0, 0.0), |(a, d0), &(x, y)| (a + x, d0 + y));
        let mut acc = 0.0;
        let mut mean_loo = 0.0;
        let loo: Vec<f64> = self
            .per_start_sums
            .iter()
            .map(|&(a, d0)| (tot_all - a) / (tot_diag - d0))
            .collect();
        for &x in &loo {
            mean_loo += x / n as f64;
        }
        for &x in &loo {
            acc += (x - mean_loo).powi(2);
        }
        let se = ((n - 1) as f64 / n as f64 * acc).sqrt();
        (chi, se)
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Indexed numeric series with per-point sampling errors.
#[derive(Clone, Debug, Default)]
pub struct ObservableSeries {
    pub index: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: Vec<u64>,
}

impl ObservableSeries {
    pub fn push(&mut self, index: f64, value: f64, stderr: f64, n: u64) {
        if let Some(&last) = self.index.last() {
            assert!(index > last, "series index must be strictly increasing");
        }
        self.index.push(index);
        self.value.push(value);
        self.stderr.push(stderr);
        self.n.push(n);
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Fraction of nodes per level whose reconstructed symbol equals the truth,
/// averaged over the batch. Index `l` of the result is tree level `l`.
pub fn layer_reconstruction(truth: &SampleTree, samples: &[SampleTree]) -> Vec<f64> {
    let depth = truth.depth();
    let mut out = vec![0.0; depth + 1];
    for s in samples {
        for l in 0..=depth {
            let t = truth.level(l);
            let got = s.level(l);
            let hits = t.iter().zip(got).filter(|(a, b)| a == b).count();
            out[l] += hits as f64 / t.len() as f64;
        }
    }
    out.iter_mut().for_each(|x| *x /= samples.len() as f64);
    out
}

/// Mean per-sample occurrence and centered covariance of rule firings.
#[derive(Clone, Debug)]
pub struct RuleUsage {
    /// `(level, parent, production index)` per column.
    pub labels: Vec<(usize, Symbol, usize)>,
    pub mean: Vec<f64>,
    /// Row-major `k x k` covariance across samples (unbiased).
    pub cov: Vec<f64>,
}

/// Rule identifiers `(level, parent, production)` in canonical order.
pub fn rule_labels(rules: &RuleSet) -> Vec<(usize, Symbol, usize)> {
    let p = rules.params();
    (1..=p.depth)
        .flat_map(|l| (0..p.v).flat_map(move |y| (0..p.m).map(move |j| (l, y as Symbol, j))))
        .collect()
}

/// Firing counts of one complete derivation, indexed like [`rule_labels`].
pub fn rule_counts(tree: &SampleTree, rules: &RuleSet) -> Result<Vec<f64>> {
    let p = rules.params();
    let per_level = p.m * p.v;
    let mut row = vec![0.0f64; p.depth * per_level];
    for l in 1..=p.depth {
        let parents = tree.level(l);
        let children = tree.level(l - 1);
        for (i, &y) in parents.iter().enumerate() {
            let tuple = &children[i * p.s..(i + 1) * p.s];
            let j = (0..p.m)
                .find(|&j| rules.tuple(l, y, j) == tuple)
                .ok_or_else(|| {
                    Error::InvalidParams(format!(
                        "level {l} node {i}: tuple is not a production of {y}"
                    ))
                })?;
            row[(l - 1) * per_level + y as usize * p.m + j] += 1.0;
        }
    }
    Ok(row)
}

/// Counts rule firings in complete derivation trees.
pub fn rule_usage_stats(trees: &[SampleTree], rules: &RuleSet) -> Result<RuleUsage> {
    let p = rules.params();
    if trees.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let per_level = p.m * p.v;
    let k = p.depth * per_level;
    let labels = rule_labels(rules);

    let mut counts = vec![0.0f64; trees.len() * k];
    for (ti, tree) in trees.iter().enumerate() {
        counts[ti * k..(ti + 1) * k].copy_from_slice(&rule_counts(tree, rules)?);
    }

    let n = trees.len() as f64;
    let mut mean = vec![0.0; k];
    for row in counts.chunks_exact(k) {
        for (m, &c) in mean.iter_mut().zip(row) {
            *m += c;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = vec![0.0; k * k];
    if trees.len() > 1 {
        for row in counts.chunks_exact(k) {
            for a in 0..k {
                let da = row[a] - mean[a];
                for b in a..k {
                    cov[a * k + b] += da * (row[b] - mean[b]);
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                let x = cov[a * k + b] / (n - 1.0);
                cov[a * k + b] = x;
                cov[b * k + a] = x;
            }
        }
    }
    Ok(RuleUsage { labels, mean, cov })
}

/// Magnitude of the covariance between one-hot tokens at a given distance.
#[derive(Clone, Copy, Debug)]
pub struct TokenCorrelation {
    pub dist: usize,
    /// Frobenius norm of the pooled empirical covariance matrix.
    pub frobenius: f64,
    /// Reported sampling-noise scale `1/(v sqrt(n_pairs))`.
    pub noise_floor: f64,
    pub n_pairs: usize,
}

/// Token-token correlation magnitude of a generated set per distance,
/// pooling all position pairs at that distance.
pub fn token_token_correlation(seqs: &[Vec<Symbol>], v: usize) -> Vec<TokenCorrelation> {
    if seqs.is_empty() {
        return Vec::new();
    }
    let d = seqs[0].len();
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    let mut joint = vec![0.0f64; v * v];
    for dist in 1..d {
        joint.iter_mut().for_each(|x| *x = 0.0);
        let mut n_pairs = 0usize;
        for s in seqs {
            debug_assert_eq!(s.len(), d);
            for i in 0..d - dist {
                joint[s[i] as usize * v + s[i + dist] as usize] += 1.0;
                n_pairs += 1;
            }
        }
        let norm = 1.0 / n_pairs as f64;
        let mut left = vec![0.0f64; v];
        let mut right = vec![0.0f64; v];
        for a in 0..v {
            for b in 0..v {
                let p = joint[a * v + b] * norm;
                left[a] += p;
                right[b] += p;
            }
        }
        let mut frob2 = 0.0;
        for a in 0..v {
            for b in 0..v {
                let c = joint[a * v + b] * norm - left[a] * right[b];
                frob2 += c * c;
            }
        }
        out.push(TokenCorrelation {
            dist,
            frobenius: frob2.sqrt(),
            noise_floor: 1.0 / (v as f64 * (n_pairs as f64).sqrt()),
            n_pairs,
        });
    }
    out
}

/// Copy metrics of a generated set against a training set.
#[derive(Clone, Debug)]
pub struct CopyReport {
    /// Share of generated strings with `min_dist <= threshold`.
    pub fraction: f64,
    /// Normalized Hamming distance to the nearest training string.
    pub min_dist: Vec<f64>,
    pub is_copy: Vec<bool>,
}

/// Nearest-neighbour normalized Hamming distances; a sample is a copy when
/// its distance does not exceed `threshold` (0 keeps exact matches only).
pub fn copy_fraction(
    generated: &[Vec<Symbol>],
    train: &[Vec<Symbol>],
    threshold: f64,
) -> Result<CopyReport> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let d = train[0].len();
    let mut min_dist = Vec::with_capacity(generated.len());
    let mut is_copy = Vec::with_capacity(generated.len());
    for g in generated {
        if g.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: g.len(),
            });
        }
        let mut best = usize::MAX;
        for t in train {
            let dist = g.iter().zip(t).filter(|(a, b)| a != b).count();
            best = best.min(dist);
            if best == 0 {
                break;
            }
        }
        let nd = best as f64 / d as f64;
        min_dist.push(nd);
        is_copy.push(nd <= threshold);
    }
    let fraction = is_copy.iter().filter(|&&b| b).count() as f64 / generated.len().max(1) as f64;
    Ok(CopyReport {
        fraction,
        min_dist,
        is_copy,
    })
}

/// Aggregates a hashable item stream into counts.
pub fn histogram<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, u64> {
    let mut h = HashMap::new();
    for x in items {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}
