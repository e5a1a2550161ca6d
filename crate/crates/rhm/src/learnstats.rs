//! Learnability of the grammar from data statistics: token correlation
//! magnitudes, the correlation-based synonym clustering algorithm with its
//! measured sample complexity, and the one-step gradient-descent identity
//! for a linear next-token model.
//!
//! The closed-form magnitudes here use the asymptotic rule density
//! `m / v^(s-1)`; the mean-field algebra in [`crate::meanfield`] keeps the
//! exact density instead.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grammar::{sample_tree, RhmParams, RuleSet, SampleTree, Symbol};
use crate::seeding;

/// Typical magnitude of the connected correlation between one visible token
/// and a tuple whose lowest common ancestor sits at level `l`:
/// `sqrt((1 - m/v^(s-1)) / (v^3 m^(l+2)))`.
pub fn theoretical_correlation_magnitude(params: &RhmParams, l: usize) -> f64 {
    let f = params.f_asym();
    let v = params.v as f64;
    let m = params.m as f64;
    ((1.0 - f) / (v.powi(3) * m.powi(l as i32 + 2))).sqrt()
}

/// Samples needed to resolve those correlations against sampling noise:
/// `P_l = (1 - m/v^(s-1))^(-1) v m^(l+1)`.
pub fn sample_complexity(params: &RhmParams, l: usize) -> f64 {
    let f = params.f_asym();
    params.v as f64 * (params.m as f64).powi(l as i32 + 1) / (1.0 - f)
}

/// Which context tokens are averaged for each patch value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// One visible token.
    SingleToken { leaf: usize },
    /// A whole visible `s`-block (concatenated one-hot means).
    VisibleTuple { block: usize },
}

/// Designates the patch whose values are profiled: the `s`-tuple at block
/// `block` of level `tuple_level` (0 is the visible layer).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSpec {
    pub tuple_level: usize,
    pub block: usize,
    pub context: Context,
}

/// Mean one-hot context per observed patch value, with sample counts.
#[derive(Clone, Debug)]
pub struct ContextVectors {
    /// Dimension of each mean vector.
    pub dim: usize,
    /// Patch value (the `s` symbols) to (mean context, count).
    pub vectors: BTreeMap<Vec<Symbol>, (Vec<f64>, u64)>,
}

impl ContextVectors {
    /// Values seen at least once.
    pub fn observed(&self) -> usize {
        self.vectors.len()
    }
}

/// Empirical conditional expectation of the one-hot context given each
/// patch value, over a batch of complete derivations.
pub fn mean_context_vectors(
    trees: &[SampleTree],
    params: &RhmParams,
    spec: PatchSpec,
) -> Result<ContextVectors> {
    if trees.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let v = params.v;
    let s = params.s;
    if spec.tuple_level >= params.depth {
        return Err(Error::InvalidParams(format!(
            "tuple_level {} must be below the root",
            spec.tuple_level
        )));
    }
    let blocks = params.nodes_at(spec.tuple_level) / s;
    if spec.block >= blocks {
        return Err(Error::InvalidParams(format!(
            "block {} out of {blocks} at level {}",
            spec.block, spec.tuple_level
        )));
    }
    let ctx_positions: Vec<usize> = match spec.context {
        Context::SingleToken { leaf } => vec![leaf],
        Context::VisibleTuple { block } => (block * s..(block + 1) * s).collect(),
    };
    let d = params.leaf_count();
    if ctx_positions.iter().any(|&i| i >= d) {
        return Err(Error::InvalidParams("context position out of range".into()));
    }

    let dim = ctx_positions.len() * v;
    let mut vectors: BTreeMap<Vec<Symbol>, (Vec<f64>, u64)> = BTreeMap::new();
    for tree in trees {
        let row = tree.level(spec.tuple_level);
        let key = row[spec.block * s..(spec.block + 1) * s].to_vec();
        let entry = vectors.entry(key).or_insert_with(|| (vec![0.0; dim], 0));
        for (slot, &pos) in ctx_positions.iter().enumerate() {
            entry.0[slot * v + tree.leaves()[pos] as usize] += 1.0;
        }
        entry.1 += 1;
    }
    for (mean, count) in vectors.values_mut() {
        for x in mean.iter_mut() {
            *x /= *count as f64;
        }
    }
    Ok(ContextVectors { dim, vectors })
}

/// K-means configuration: seeded restarts with an iteration cap.
#[derive(Clone, Copy, Debug)]
pub struct KmeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            restarts: 16,
            max_iters: 100,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Plain k-means with distance-weighted seeding; returns `(assignment,
/// within-cluster sum of squares)` of the best restart.
pub fn kmeans(
    data: &[Vec<f64>],
    k: usize,
    cfg: KmeansConfig,
    rng: &mut impl Rng,
) -> (Vec<usize>, f64) {
    assert!(!data.is_empty() && k >= 1 && k <= data.len());
    let dim = data[0].len();
    let mut best: Option<(Vec<usize>, f64)> = None;

    for _ in 0..cfg.restarts {
        // distance-weighted seeding
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        centers.push(data[rng.random_range(0..data.len())].clone());
        let mut d2: Vec<f64> = data.iter().map(|x| dist2(x, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.random_range(0..data.len())
            } else {
                let mut u = rng.random::<f64>() * total;
                let mut pick = data.len() - 1;
                for (i, &w) in d2.iter().enumerate() {
                    u -= w;
                    if u < 0.0 {
                        pick = i;
                        break;
                    }
                }
                pick
            };
            centers.push(data[next].clone());
            for (i, x) in data.iter().enumerate() {
                d2[i] = d2[i].min(dist2(x, &centers[centers.len() - 1]));
            }
        }

        let mut assign = vec![0usize; data.len()];
        for _ in 0..cfg.max_iters {
            let mut moved = false;
            for (i, x) in data.iter().enumerate() {
                let mut arg = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = dist2(x, center);
                    if d < best_d {
                        best_d = d;
                        arg = c;
                    }
                }
                if assign[i] != arg {
                    assign[i] = arg;
                    moved = true;
                }
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (i, x) in data.iter().enumerate() {
                counts[assign[i]] += 1;
                for (dst, &xi) in sums[assign[i]].iter_mut().zip(x) {
                    *dst += xi;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    for x in sums[c].iter_mut() {
                        *x /= counts[c] as f64;
                    }
                    centers[c] = std::mem::take(&mut sums[c]);
                }
                // empty clusters keep their previous center
            }
            if !moved {
                break;
            }
        }
        let inertia: f64 = data
            .iter()
            .zip(&assign)
            .map(|(x, &c)| dist2(x, &centers[c]))
            .sum();
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((assign, inertia));
        }
    }
    best.expect("at least one restart")
}

/// Maximum-weight one-to-one assignment of `n x n` scores (rows to
/// columns); classic augmenting-path algorithm on potentials.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    debug_assert!(weights.iter().all(|r| r.len() == n));
    // convert to min-cost with padding row/col index 0
    let inf = f64::INFINITY;
    let top = weights
        .iter()
        .flat_map(|r| r.iter())
        .cloned()
        .fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| top - weights[i][j];

    let mut u = vec![0.0; n + 1];
    let mut vpot = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut matched_col = vec![usize::MAX; n + 1]; // column -> row (1-based rows)

    for i in 1..=n {
        matched_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_col[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - vpot[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_col[j]] += delta;
                    vpot[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_col[j0] == usize::MAX {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_col[j0] = matched_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if matched_col[j] != usize::MAX && matched_col[j] != 0 {
            row_to_col[matched_col[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Result of clustering patch values by their mean contexts.
#[derive(Clone, Debug)]
pub struct ClusterOutcome {
    /// Cluster id per observed patch value (iteration order of
    /// [`ContextVectors::vectors`]).
    pub assignment: Vec<usize>,
    /// Share of values landing in the cluster matched to their true parent
    /// under the optimal cluster-to-parent matching.
    pub purity: f64,
    /// `purity == 1`.
    pub success: bool,
}

/// Groups patch values by k-means over their mean context vectors and
/// scores the grouping against the true parent of each value.
pub fn cluster_synonyms(
    cv: &ContextVectors,
    parent_of: impl Fn(&[Symbol]) -> Option<Symbol>,
    k: usize,
    cfg: KmeansConfig,
    rng: &mut impl Rng,
) -> Result<ClusterOutcome> {
    let n = cv.vectors.len();
    if n < k {
        return Err(Error::DegenerateInput(format!(
            "{n} observed values for {k} clusters"
        )));
    }
    let data: Vec<Vec<f64>> = cv.vectors.values().map(|(mean, _)| mean.clone()).collect();
    {
        let mut distinct = data.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        if distinct.len() < k {
            return Err(Error::DegenerateInput(format!(
                "{} distinct vectors for {k} clusters",
                distinct.len()
            )));
        }
    }
    let parents: Vec<Symbol> = cv
        .vectors
        .keys()
        .map(|key| {
            parent_of(key).ok_or_else(|| {
                Error::InvalidParams(format!("patch value {key:?} has no parent"))
            })
        })
        .collect::<Result<_>>()?;

    let (assignment, _) = kmeans(&data, k, cfg, rng);

    // overlap counts between clusters and parents, padded square
    let classes = k.max(parents.iter().map(|&p| p as usize + 1).max().unwrap_or(0));
    let mut overlap = vec![vec![0.0; classes]; classes];
    for (&c, &p) in assignment.iter().zip(&parents) {
        overlap[c][p as usize] += 1.0;
    }
    let matching = max_weight_assignment(&overlap);
    let matched: f64 = matching
        .iter()
        .enumerate()
        .map(|(c, &p)| if p < classes { overlap[c][p] } else { 0.0 })
        .sum();
    let purity = matched / n as f64;
    Ok(ClusterOutcome {
        assignment,
        purity,
        success: purity == 1.0,
    })
}

/// One point of a sample-complexity scan.
#[derive(Clone, Copy, Debug)]
pub struct ScanPoint {
    pub p: usize,
    pub success_rate: f64,
    pub trials: usize,
}

/// Success rate of the clustering pipeline at training-set size `p`:
/// every trial draws a fresh grammar instance and `p` independent strings,
/// and counts a trial as a success when the purity reaches
/// `purity_threshold` (1.0 demands the exact parent partition).
///
/// Sparse instances can leave some parents structurally unreachable at the
/// patch position; their tuples never occur and a `v`-way grouping cannot
/// be perfect at any sample size. Such instances are redrawn (the property
/// is read off the rules, not the data). A threshold slightly below 1 also
/// tolerates the occasional realization whose exact context vectors
/// coincide for two parents, which no sample size can separate.
pub fn clustering_success_rate(
    base: RhmParams,
    spec: PatchSpec,
    p: usize,
    trials: usize,
    purity_threshold: f64,
    seed: u64,
) -> Result<f64> {
    let mut hits = 0usize;
    for trial in 0..trials {
        let rules = fresh_reachable_instance(base, spec, seed, trial as u64)?;
        let mut rng = seeding::stream(seed, "scan-data", trial as u64);
        let trees: Vec<SampleTree> = (0..p).map(|_| sample_tree(&rules, None, &mut rng)).collect();
        let cv = mean_context_vectors(&trees, rules.params(), spec)?;
        let mut crng = seeding::stream(seed, "scan-cluster", trial as u64);
        let outcome = cluster_synonyms(
            &cv,
            |key| rules.parent_of(spec.tuple_level + 1, key),
            base.v,
            KmeansConfig::default(),
            &mut crng,
        );
        match outcome {
            Ok(out) if out.purity >= purity_threshold => hits += 1,
            Ok(_) => {}
            // too few observed values counts as a failure, not an error
            Err(Error::DegenerateInput(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Draws grammar instances until the patch's parent node can take every
/// symbol.
fn fresh_reachable_instance(
    base: RhmParams,
    spec: PatchSpec,
    seed: u64,
    trial: u64,
) -> Result<RuleSet> {
    for attempt in 0..1000u64 {
        let inst = RhmParams {
            seed: u64::from_le_bytes(
                seeding::stream_seed(seed, "scan-instance", trial * 1000 + attempt)[..8]
                    .try_into()
                    .unwrap(),
            ),
            ..base
        };
        let rules = RuleSet::generate(inst)?;
        let reach =
            crate::grammar::reachable_symbols(&rules, spec.tuple_level + 1, spec.block);
        if reach.len() == base.v {
            return Ok(rules);
        }
    }
    Err(Error::DegenerateInput(
        "no instance reaches every parent at the patch position".into(),
    ))
}

/// Smallest grid size whose success rate reaches `threshold`, located by
/// bisection over the sorted grid. Returns the probed points and the
/// selected size (`None` if even the largest grid point fails).
pub fn sample_complexity_scan(
    base: RhmParams,
    spec: PatchSpec,
    p_grid: &[usize],
    trials: usize,
    purity_threshold: f64,
    threshold: f64,
    seed: u64,
) -> Result<(Vec<ScanPoint>, Option<usize>)> {
    assert!(!p_grid.is_empty() && p_grid.windows(2).all(|w| w[0] < w[1]));
    let mut probed = Vec::new();
    let rate_at = |p: usize, probed: &mut Vec<ScanPoint>| -> Result<f64> {
        let rate = clustering_success_rate(base, spec, p, trials, purity_threshold, seed)?;
        probed.push(ScanPoint {
            p,
            success_rate: rate,
            trials,
        });
        Ok(rate)
    };

    let mut lo = 0usize;
    let mut hi = p_grid.len() - 1;
    if rate_at(p_grid[hi], &mut probed)? < threshold {
        probed.sort_by_key(|pt| pt.p);
        return Ok((probed, None));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if rate_at(p_grid[mid], &mut probed)? >= threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    probed.sort_by_key(|pt| pt.p);
    probed.dedup_by_key(|pt| pt.p);
    Ok((probed, Some(p_grid[hi])))
}

/// Linear next-token model over tuple indices.
#[derive(Clone, Debug)]
pub struct PerceptronState {
    /// `v x n_inputs` weights, row-major.
    pub w: Vec<f64>,
    pub v: usize,
    pub n_inputs: usize,
}

/// One explicit gradient step against the closed-form update.
#[derive(Clone, Debug)]
pub struct OneStepOutcome {
    pub init: PerceptronState,
    /// Weights after one explicit cross-entropy gradient step.
    pub after: PerceptronState,
    /// Empirical connected token-input correlation (the closed form says
    /// `after = init + eta * corr`).
    pub corr: Vec<f64>,
}

/// Trains for exactly one gradient step from the marginal-log-probability
/// initialization on pairs `(input index, next token)`.
///
/// The explicit gradient of the softmax cross-entropy at that
/// initialization equals the empirical connected correlation between the
/// one-hot token and the one-hot input, so `after - init` must reproduce
/// `eta * corr` to machine precision.
pub fn one_step_gd(
    pairs: &[(usize, Symbol)],
    v: usize,
    n_inputs: usize,
    eta: f64,
) -> Result<OneStepOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n = pairs.len() as f64;
    let mut p_token = vec![0.0f64; v];
    let mut p_input = vec![0.0f64; n_inputs];
    let mut joint = vec![0.0f64; v * n_inputs];
    for &(mu, nu) in pairs {
        assert!(mu < n_inputs && (nu as usize) < v);
        p_token[nu as usize] += 1.0;
        p_input[mu] += 1.0;
        joint[nu as usize * n_inputs + mu] += 1.0;
    }
    p_token.iter_mut().for_each(|x| *x /= n);
    p_input.iter_mut().for_each(|x| *x /= n);
    joint.iter_mut().for_each(|x| *x /= n);

    // initialization: every column carries the log marginal of the token
    let w0: Vec<f64> = (0..v)
        .flat_map(|nu| std::iter::repeat_n(p_token[nu].ln(), n_inputs))
        .collect();

    // explicit gradient of the empirical cross-entropy at w0: the logits of
    // example (mu, .) are column mu, softmaxed over tokens
    let mut grad = vec![0.0f64; v * n_inputs];
    for &(mu, nu) in pairs {
        // softmax of column mu at the initialization
        let mut z = 0.0;
        let mut probs = vec![0.0f64; v];
        let top = (0..v)
            .map(|r| w0[r * n_inputs + mu])
            .fold(f64::NEG_INFINITY, f64::max);
        for r in 0..v {
            let e = (w0[r * n_inputs + mu] - top).exp();
            probs[r] = e;
            z += e;
        }
        for r in 0..v {
            let soft = probs[r] / z;
            let indicator = if r == nu as usize { 1.0 } else { 0.0 };
            grad[r * n_inputs + mu] += (indicator - soft) / n;
        }
    }
    let after: Vec<f64> = w0.iter().zip(&grad).map(|(w, g)| w + eta * g).collect();

    let mut corr = vec![0.0f64; v * n_inputs];
    for nu in 0..v {
        for mu in 0..n_inputs {
            corr[nu * n_inputs + mu] = joint[nu * n_inputs + mu] - p_token[nu] * p_input[mu];
        }
    }
    Ok(OneStepOutcome {
        init: PerceptronState {
            w: w0,
            v,
            n_inputs,
        },
        after: PerceptronState {
            w: after,
            v,
            n_inputs,
        },
        corr,
    })
}

/// Canonical index of a level-1 tuple: `parent * m + production`.
pub fn tuple_index(rules: &RuleSet, tuple: &[Symbol]) -> Option<usize> {
    let p = rules.params();
    let parent = rules.parent_of(1, tuple)?;
    (0..p.m)
        .find(|&j| rules.tuple(1, parent, j) == tuple)
        .map(|j| parent as usize * p.m + j)
}
