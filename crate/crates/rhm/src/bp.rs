//! Exact sum-product inference on the grammar tree.
//!
//! Factors are the production rules; variables are the tree nodes. Upward
//! messages flow leaves to root, downward messages root to leaves, and their
//! normalized product at a node is its posterior marginal conditioned on the
//! leaf beliefs. Messages stay in the linear domain with per-node
//! normalization; an all-zero message (possible only with hard evidence on
//! an invalid string) raises [`Error::ContradictoryEvidence`].
//!
//! Factor sums iterate the `m*v` stored tuples per level rather than the
//! dense `v^(s+1)` tensor, so one sweep costs `O(d * m * v * s)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grammar::{RuleSet, SampleTree, Symbol};
use crate::matrix::Matrix;
use crate::noise::{self, LeafPriors};

/// Messages and marginals of one sweep over one tree.
///
/// Levels are indexed `0..=depth`; level `l` holds `s^(depth-l)` nodes and
/// each node carries a `v`-vector.
#[derive(Clone, Debug)]
pub struct BeliefField {
    v: usize,
    up: Vec<Vec<f64>>,
    down: Option<Vec<Vec<f64>>>,
}

impl BeliefField {
    pub fn vocab(&self) -> usize {
        self.v
    }

    pub fn depth(&self) -> usize {
        self.up.len() - 1
    }

    pub fn nodes_at(&self, level: usize) -> usize {
        self.up[level].len() / self.v
    }

    /// Normalized upward message at a node.
    pub fn up(&self, level: usize, node: usize) -> &[f64] {
        &self.up[level][node * self.v..(node + 1) * self.v]
    }

    /// Normalized downward message at a node; panics before the downward
    /// sweep has run.
    pub fn down(&self, level: usize, node: usize) -> &[f64] {
        let down = self.down.as_ref().expect("downward sweep not run");
        &down[level][node * self.v..(node + 1) * self.v]
    }

    pub fn has_down(&self) -> bool {
        self.down.is_some()
    }

    /// Posterior marginal at a node: the normalized product of the upward
    /// and downward messages.
    pub fn marginal(&self, level: usize, node: usize) -> Vec<f64> {
        let up = self.up(level, node);
        let down = self.down(level, node);
        let mut p: Vec<f64> = up.iter().zip(down).map(|(a, b)| a * b).collect();
        let z: f64 = p.iter().sum();
        debug_assert!(z > 0.0, "marginal normalization vanished");
        p.iter_mut().for_each(|x| *x /= z);
        p
    }

    /// Leaf marginals as a `d x v` matrix: the denoiser expectation
    /// `E[x0 | observation]` row by row.
    pub fn leaf_marginals(&self) -> Matrix {
        let d = self.nodes_at(0);
        let mut m = Matrix::zeros(d, self.v);
        for i in 0..d {
            m.row_mut(i).copy_from_slice(&self.marginal(0, i));
        }
        m
    }

    /// Debug dump: node-indexed message and marginal vectors.
    pub fn to_json(&self) -> String {
        let mut levels = Vec::new();
        for l in 0..=self.depth() {
            let mut nodes = Vec::new();
            for i in 0..self.nodes_at(l) {
                let mut entry = serde_json::Map::new();
                entry.insert("up".into(), json_vec(self.up(l, i)));
                if self.has_down() {
                    entry.insert("down".into(), json_vec(self.down(l, i)));
                    entry.insert("marginal".into(), json_vec(&self.marginal(l, i)));
                }
                nodes.push(serde_json::Value::Object(entry));
            }
            levels.push(serde_json::Value::Array(nodes));
        }
        serde_json::Value::Array(levels).to_string()
    }
}

fn json_vec(xs: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(
        xs.iter()
            .map(|&x| serde_json::Value::String(format!("{x:.16e}")))
            .collect(),
    )
}

fn normalize(msg: &mut [f64], level: usize, node: usize) -> Result<()> {
    let z: f64 = msg.iter().sum();
    if z <= 0.0 {
        return Err(Error::ContradictoryEvidence { level, node });
    }
    msg.iter_mut().for_each(|x| *x /= z);
    Ok(())
}

/// Upward sweep: fills normalized upward messages from the leaf beliefs
/// through the root.
pub fn upward_pass(rules: &RuleSet, priors: &LeafPriors) -> Result<BeliefField> {
    let p = rules.params();
    let (v, m, s) = (p.v, p.m, p.s);
    if priors.len() != p.leaf_count() {
        return Err(Error::LengthMismatch {
            expected: p.leaf_count(),
            got: priors.len(),
        });
    }
    if priors.vocab() != v {
        return Err(Error::InvalidParams(format!(
            "prior vocabulary {} != v = {v}",
            priors.vocab()
        )));
    }

    let mut up: Vec<Vec<f64>> = Vec::with_capacity(p.depth + 1);
    let mut leaf = vec![0.0; p.leaf_count() * v];
    for i in 0..p.leaf_count() {
        let mut row = priors.row(i).to_vec();
        normalize(&mut row, 0, i)?;
        leaf[i * v..(i + 1) * v].copy_from_slice(&row);
    }
    up.push(leaf);

    for l in 1..=p.depth {
        let n = p.nodes_at(l);
        let below = &up[l - 1];
        let mut msgs = vec![0.0; n * v];
        for node in 0..n {
            let msg = &mut msgs[node * v..(node + 1) * v];
            for y in 0..v {
                let mut acc = 0.0;
                for j in 0..m {
                    let tuple = rules.tuple(l, y as Symbol, j);
                    let mut w = 1.0;
                    for (i, &x) in tuple.iter().enumerate() {
                        w *= below[(node * s + i) * v + x as usize];
                    }
                    acc += w;
                }
                msg[y] = acc;
            }
            normalize(msg, l, node)?;
        }
        up.push(msgs);
    }

    Ok(BeliefField { v, up, down: None })
}

/// Downward sweep. `root_prior` defaults to the uniform class prior.
pub fn downward_pass(
    rules: &RuleSet,
    field: &mut BeliefField,
    root_prior: Option<&[f64]>,
) -> Result<()> {
    let p = rules.params();
    let (v, m, s) = (p.v, p.m, p.s);
    let mut down: Vec<Vec<f64>> = vec![Vec::new(); p.depth + 1];

    let mut root = match root_prior {
        Some(prior) => {
            if prior.len() != v {
                return Err(Error::LengthMismatch {
                    expected: v,
                    got: prior.len(),
                });
            }
            prior.to_vec()
        }
        None => vec![1.0 / v as f64; v],
    };
    normalize(&mut root, p.depth, 0)?;
    down[p.depth] = root;

    // Prefix/suffix products of the children's upward beliefs let every
    // child position reuse one pass over the tuples.
    let mut prefix = vec![0.0f64; p.s + 1];
    let mut suffix = vec![0.0f64; p.s + 1];
    for l in (0..p.depth).rev() {
        let n = p.nodes_at(l);
        let mut msgs = vec![0.0; n * v];
        let parent_down = std::mem::take(&mut down[l + 1]);
        let below = &field.up[l];
        for parent in 0..p.nodes_at(l + 1) {
            let pd = &parent_down[parent * v..(parent + 1) * v];
            for y in 0..v {
                if pd[y] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    let tuple = rules.tuple(l + 1, y as Symbol, j);
                    prefix[0] = 1.0;
                    for i in 0..s {
                        prefix[i + 1] =
                            prefix[i] * below[(parent * s + i) * v + tuple[i] as usize];
                    }
                    suffix[s] = 1.0;
                    for i in (0..s).rev() {
                        suffix[i] =
                            suffix[i + 1] * below[(parent * s + i) * v + tuple[i] as usize];
                    }
                    for c in 0..s {
                        let w = pd[y] * prefix[c] * suffix[c + 1];
                        msgs[(parent * s + c) * v + tuple[c] as usize] += w;
                    }
                }
            }
        }
        down[l + 1] = parent_down;
        for node in 0..n {
            normalize(&mut msgs[node * v..(node + 1) * v], l, node)?;
        }
        down[l] = msgs;
    }

    field.down = Some(down);
    Ok(())
}

/// Full upward plus downward sweep.
pub fn run(rules: &RuleSet, priors: &LeafPriors, root_prior: Option<&[f64]>) -> Result<BeliefField> {
    let mut field = upward_pass(rules, priors)?;
    downward_pass(rules, &mut field, root_prior)?;
    Ok(field)
}

/// Denoiser expectation `E[x0 | observation]`: one marginal row per leaf.
pub fn denoiser_expectation(rules: &RuleSet, priors: &LeafPriors) -> Result<Matrix> {
    Ok(run(rules, priors, None)?.leaf_marginals())
}

fn sample_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Ancestral sample from the joint posterior over the whole tree.
///
/// The root is drawn from its marginal; descending, each factor picks one of
/// the parent's productions with probability proportional to the product of
/// the children's upward beliefs at the tuple values.
pub fn sample_posterior(
    rules: &RuleSet,
    priors: &LeafPriors,
    root_prior: Option<&[f64]>,
    rng: &mut impl Rng,
) -> Result<SampleTree> {
    let field = upward_pass(rules, priors)?;
    let p = rules.params();
    let (v, m, s) = (p.v, p.m, p.s);

    let root_weights: Vec<f64> = match root_prior {
        Some(prior) => field.up(p.depth, 0).iter().zip(prior).map(|(a, b)| a * b).collect(),
        None => field.up(p.depth, 0).to_vec(),
    };
    let total: f64 = root_weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ContradictoryEvidence {
            level: p.depth,
            node: 0,
        });
    }

    let mut levels = vec![Vec::new(); p.depth + 1];
    levels[p.depth] = vec![sample_index(&root_weights, rng) as Symbol];
    for l in (0..p.depth).rev() {
        let mut row = vec![0 as Symbol; p.nodes_at(l)];
        let below = &field.up[l];
        let parents = levels[l + 1].clone();
        let mut weights = vec![0.0; m];
        for (node, &parent) in parents.iter().enumerate() {
            for (j, w) in weights.iter_mut().enumerate() {
                let tuple = rules.tuple(l + 1, parent, j);
                let mut acc = 1.0;
                for (i, &x) in tuple.iter().enumerate() {
                    acc *= below[(node * s + i) * v + x as usize];
                }
                *w = acc;
            }
            let j = sample_index(&weights, rng);
            row[node * s..(node + 1) * s].copy_from_slice(rules.tuple(l + 1, parent, j));
        }
        levels[l] = row;
    }
    Ok(SampleTree::from_levels(levels))
}

/// Channels whose reverse chain is implemented step by step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardChannel {
    /// Absorbing-state masking with schedule `beta_t = 1/(T-t+1)`.
    Masking,
    /// Uniform resampling with the cumulative keep probability decreasing
    /// linearly, `alpha_bar(t) = 1 - t/T`.
    Uniform,
    /// Not reversible step by step here; reconstruct via [`sample_posterior`].
    GaussianOneHot,
}

/// Runs the forward process to step `t`, then the exact reverse chain back
/// to step 0, re-running inference on the current observation at every
/// update. Distributionally equivalent to [`sample_posterior`] on the same
/// observation.
pub fn backward_chain(
    rules: &RuleSet,
    x0: &[Symbol],
    t: u32,
    cap_t: u32,
    channel: BackwardChannel,
    rng: &mut impl Rng,
) -> Result<Vec<Symbol>> {
    if t > cap_t || cap_t == 0 {
        return Err(Error::range("t", t as f64, "[0, T]"));
    }
    match channel {
        BackwardChannel::Masking => backward_masking(rules, x0, t, cap_t, rng),
        BackwardChannel::Uniform => backward_uniform(rules, x0, t, cap_t, rng),
        BackwardChannel::GaussianOneHot => Err(Error::UnsupportedChannel),
    }
}

fn backward_masking(
    rules: &RuleSet,
    x0: &[Symbol],
    t: u32,
    cap_t: u32,
    rng: &mut impl Rng,
) -> Result<Vec<Symbol>> {
    let v = rules.params().v;
    let mut obs = noise::masking_forward(x0, t, cap_t, v, rng);
    let mask = noise::mask_symbol(v);

    // Reverse of the absorbing chain: a token masked at step tau stays
    // masked with probability (tau-1)/tau, so each reverse step unmasks each
    // masked token with probability 1/tau. Tokens scheduled together are
    // filled one at a time, re-running inference in between, which keeps the
    // joint law exactly the posterior.
    for tau in (1..=t).rev() {
        let due: Vec<usize> = (0..obs.len())
            .filter(|&i| obs[i] == mask && rng.random_bool(1.0 / tau as f64))
            .collect();
        for i in due {
            let priors = noise::masking_prior(&obs, v)?;
            let field = run(rules, &priors, None)?;
            let marginal = field.marginal(0, i);
            obs[i] = sample_index(&marginal, rng) as Symbol;
        }
    }
    debug_assert!(obs.iter().all(|&x| x != mask));
    Ok(obs)
}

fn backward_uniform(
    rules: &RuleSet,
    x0: &[Symbol],
    t: u32,
    cap_t: u32,
    rng: &mut impl Rng,
) -> Result<Vec<Symbol>> {
    let v = rules.params().v;
    let vf = v as f64;
    let alpha_bar = |tau: u32| 1.0 - tau as f64 / cap_t as f64;

    if t == 0 {
        return Ok(x0.to_vec());
    }
    // alpha_bar(T) = 0 is the fully scrambled endpoint; forward sampling
    // needs a strictly positive keep probability, so draw uniformly there.
    let mut obs = if t == cap_t {
        (0..x0.len())
            .map(|_| rng.random_range(0..v) as Symbol)
            .collect()
    } else {
        noise::uniform_forward(x0, v, alpha_bar(t), rng)?
    };

    for tau in (1..=t).rev() {
        let ab_now = alpha_bar(tau);
        let ab_prev = alpha_bar(tau - 1);
        // single-step keep probability; ab_prev >= 1/T > 0
        let beta = 1.0 - ab_now / ab_prev;

        let prior_rows = if ab_now > 0.0 {
            noise::uniform_prior(&obs, v, ab_now)?
        } else {
            // no information at the terminal point
            LeafPriors::from_matrix(Matrix::from_rows(vec![vec![1.0 / vf; v]; obs.len()]))
        };
        let field = run(rules, &prior_rows, None)?;

        let mut next = vec![0 as Symbol; obs.len()];
        let mut weights = vec![0.0; v];
        for (i, nx) in next.iter_mut().enumerate() {
            let mu = field.marginal(0, i);
            let j = obs[i] as usize;
            for (k, w) in weights.iter_mut().enumerate() {
                // one-step transition k -> j times the cumulative k | clean
                let q_step = (1.0 - beta) * if k == j { 1.0 } else { 0.0 } + beta / vf;
                let mut acc = 0.0;
                for (clean, &mu_c) in mu.iter().enumerate() {
                    let q_prev =
                        ab_prev * if k == clean { 1.0 } else { 0.0 } + (1.0 - ab_prev) / vf;
                    let q_now = ab_now * if j == clean { 1.0 } else { 0.0 } + (1.0 - ab_now) / vf;
                    if q_now > 0.0 {
                        acc += mu_c * q_prev / q_now;
                    }
                }
                *w = q_step * acc;
            }
            *nx = sample_index(&weights, rng) as Symbol;
        }
        obs = next;
    }
    Ok(obs)
}
