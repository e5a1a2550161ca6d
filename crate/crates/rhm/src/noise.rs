//! Corruption channels and the per-leaf beliefs they induce.
//!
//! Supported channels:
//!
//! * epsilon: no forward process, the leaf beliefs themselves are corrupted
//!   by a noise-to-signal ratio `eps`;
//! * masking: absorbing state, each token independently replaced by a mask
//!   sentinel with cumulative probability `t/T`;
//! * uniform: each token resampled uniformly with cumulative probability
//!   `1 - alpha_bar`;
//! * gaussian one-hot: the one-hot rows diffused in `R^v`.
//!
//! Each `*_prior` function is the exact single-token posterior of the
//! corresponding channel under a uniform prior on the clean symbol, used as
//! the upward boundary condition of belief propagation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{OneHotSequence, Symbol};
use crate::matrix::Matrix;

/// Per-leaf categorical beliefs over the vocabulary; every row is a
/// probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafPriors {
    v: usize,
    rows: Matrix,
}

impl LeafPriors {
    pub fn from_matrix(rows: Matrix) -> Self {
        debug_assert!(rows
            .iter_rows()
            .all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9 && r.iter().all(|&x| x >= 0.0)));
        LeafPriors {
            v: rows.cols(),
            rows,
        }
    }

    pub fn delta(x0: &[Symbol], v: usize) -> Self {
        let mut m = Matrix::zeros(x0.len(), v);
        for (i, &x) in x0.iter().enumerate() {
            m.row_mut(i)[x as usize] = 1.0;
        }
        LeafPriors { v, rows: m }
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vocab(&self) -> usize {
        self.v
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }
}

/// Mask sentinel: one past the vocabulary.
pub fn mask_symbol(v: usize) -> Symbol {
    v as Symbol
}

/// Channel description, serializable for configs and manifests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum NoiseSpec {
    Epsilon { eps: f64 },
    /// Absorbing-state masking with schedule `beta_t = 1/(T-t+1)`, so the
    /// cumulative masking probability at step `t` is exactly `t/T`.
    Masking { t: u32, cap_t: u32 },
    Uniform { alpha_bar: f64 },
    GaussianOneHot { alpha_bar: f64 },
}

/// A corrupted observation of a leaf string.
#[derive(Clone, Debug, PartialEq)]
pub enum NoisyObservation {
    /// Masked tokens carry the sentinel `v`.
    Masked(Vec<Symbol>),
    /// Symbols after uniform resampling (also carries the clean string for
    /// the epsilon channel, which has no forward process).
    Uniform(Vec<Symbol>),
    /// Real-valued rows after one-hot diffusion.
    Gaussian(Matrix),
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::range(name, x, "[0, 1]"));
    }
    Ok(())
}

fn check_alpha(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::range(name, x, "(0, 1]"));
    }
    Ok(())
}

/// Flat corrupted beliefs: mass `1 - eps + eps/v` on the observed symbol
/// and `eps/v` elsewhere.
pub fn epsilon_prior(x0: &[Symbol], v: usize, eps: f64) -> Result<LeafPriors> {
    check_unit("eps", eps)?;
    let lo = eps / v as f64;
    let hi = 1.0 - eps + lo;
    let mut m = Matrix::zeros(x0.len(), v);
    for (i, &x) in x0.iter().enumerate() {
        let row = m.row_mut(i);
        row.fill(lo);
        row[x as usize] = hi;
    }
    Ok(LeafPriors { v, rows: m })
}

/// Masks each token independently with probability `t/T`.
pub fn masking_forward(
    x0: &[Symbol],
    t: u32,
    cap_t: u32,
    v: usize,
    rng: &mut impl Rng,
) -> Vec<Symbol> {
    debug_assert!(t <= cap_t && cap_t > 0);
    let p = t as f64 / cap_t as f64;
    x0.iter()
        .map(|&x| if rng.random_bool(p) { mask_symbol(v) } else { x })
        .collect()
}

/// Delta belief on observed tokens, uniform on masked ones.
pub fn masking_prior(obs: &[Symbol], v: usize) -> Result<LeafPriors> {
    let mut m = Matrix::zeros(obs.len(), v);
    let mask = mask_symbol(v);
    for (i, &x) in obs.iter().enumerate() {
        let row = m.row_mut(i);
        if x == mask {
            row.fill(1.0 / v as f64);
        } else if (x as usize) < v {
            row[x as usize] = 1.0;
        } else {
            return Err(Error::InvalidParams(format!(
                "token {x} outside vocabulary and mask sentinel {mask}"
            )));
        }
    }
    Ok(LeafPriors { v, rows: m })
}

/// Keeps each token with probability `alpha_bar`, otherwise resamples it
/// uniformly over the vocabulary (so the overall keep probability is
/// `alpha_bar + (1 - alpha_bar)/v`).
pub fn uniform_forward(
    x0: &[Symbol],
    v: usize,
    alpha_bar: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Symbol>> {
    check_alpha("alpha_bar", alpha_bar)?;
    Ok(x0
        .iter()
        .map(|&x| {
            if rng.random_bool(alpha_bar) {
                x
            } else {
                rng.random_range(0..v) as Symbol
            }
        })
        .collect())
}

/// Exact single-token posterior of the uniform channel: mass
/// `alpha_bar + (1 - alpha_bar)/v` on the observed symbol and
/// `(1 - alpha_bar)/v` elsewhere.
pub fn uniform_prior(obs: &[Symbol], v: usize, alpha_bar: f64) -> Result<LeafPriors> {
    check_alpha("alpha_bar", alpha_bar)?;
    let lo = (1.0 - alpha_bar) / v as f64;
    let hi = alpha_bar + lo;
    let mut m = Matrix::zeros(obs.len(), v);
    for (i, &x) in obs.iter().enumerate() {
        let row = m.row_mut(i);
        row.fill(lo);
        row[x as usize] = hi;
    }
    Ok(LeafPriors { v, rows: m })
}

/// Diffuses one-hot rows: `X_t = sqrt(alpha_bar) X_0 + sqrt(1 - alpha_bar) eta`.
pub fn gaussian_onehot_forward(
    x0: &OneHotSequence,
    alpha_bar: f64,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    check_alpha("alpha_bar", alpha_bar)?;
    let src = x0.matrix();
    let mut out = Matrix::zeros(src.rows(), src.cols());
    let signal = alpha_bar.sqrt();
    let noise = (1.0 - alpha_bar).sqrt();
    for i in 0..src.rows() {
        let row = out.row_mut(i);
        for (dst, &x) in row.iter_mut().zip(src.row(i)) {
            let eta: f64 = rng.sample(StandardNormal);
            *dst = signal * x + noise * eta;
        }
    }
    Ok(out)
}

/// Single-token posterior of the one-hot diffusion: a per-row softmax of
/// `x / delta_t` with `delta_t = (1 - alpha_bar)/sqrt(alpha_bar)`, computed
/// with max subtraction. `alpha_bar = 1` degenerates to the argmax delta.
pub fn gaussian_prior(xt: &Matrix, alpha_bar: f64) -> Result<LeafPriors> {
    check_alpha("alpha_bar", alpha_bar)?;
    let delta = (1.0 - alpha_bar) / alpha_bar.sqrt();
    let v = xt.cols();
    let mut m = Matrix::zeros(xt.rows(), v);
    for i in 0..xt.rows() {
        let src = xt.row(i);
        let row = m.row_mut(i);
        let top = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if delta == 0.0 {
            let hits = src.iter().filter(|&&x| x == top).count();
            for (dst, &x) in row.iter_mut().zip(src) {
                *dst = if x == top { 1.0 / hits as f64 } else { 0.0 };
            }
            continue;
        }
        let mut z = 0.0;
        for (dst, &x) in row.iter_mut().zip(src) {
            let e = ((x - top) / delta).exp();
            *dst = e;
            z += e;
        }
        row.iter_mut().for_each(|x| *x /= z);
    }
    Ok(LeafPriors { v, rows: m })
}

/// Corrupts `x0` under `spec`. The epsilon channel has no forward process
/// and returns the clean string.
pub fn forward(
    x0: &[Symbol],
    v: usize,
    spec: NoiseSpec,
    rng: &mut impl Rng,
) -> Result<NoisyObservation> {
    Ok(match spec {
        NoiseSpec::Epsilon { eps } => {
            check_unit("eps", eps)?;
            NoisyObservation::Uniform(x0.to_vec())
        }
        NoiseSpec::Masking { t, cap_t } => {
            NoisyObservation::Masked(masking_forward(x0, t, cap_t, v, rng))
        }
        NoiseSpec::Uniform { alpha_bar } => {
            NoisyObservation::Uniform(uniform_forward(x0, v, alpha_bar, rng)?)
        }
        NoiseSpec::GaussianOneHot { alpha_bar } => {
            let enc = crate::grammar::encode_onehot(x0, v)?;
            NoisyObservation::Gaussian(gaussian_onehot_forward(&enc, alpha_bar, rng)?)
        }
    })
}

/// Leaf beliefs for an observation produced under `spec`.
pub fn prior(obs: &NoisyObservation, v: usize, spec: NoiseSpec) -> Result<LeafPriors> {
    match (spec, obs) {
        (NoiseSpec::Epsilon { eps }, NoisyObservation::Uniform(x)) => epsilon_prior(x, v, eps),
        (NoiseSpec::Masking { .. }, NoisyObservation::Masked(x)) => masking_prior(x, v),
        (NoiseSpec::Uniform { alpha_bar }, NoisyObservation::Uniform(x)) => {
            uniform_prior(x, v, alpha_bar)
        }
        (NoiseSpec::GaussianOneHot { alpha_bar }, NoisyObservation::Gaussian(xt)) => {
            gaussian_prior(xt, alpha_bar)
        }
        _ => Err(Error::InvalidParams(
            "observation does not match the channel".into(),
        )),
    }
}

/// Effective flat-noise level of arbitrary leaf beliefs: `v` times the mean
/// belief assigned to wrong symbols. Inverts [`epsilon_prior`] exactly and
/// averages to `t/T` under masking. The estimator can overshoot 1 on a
/// finite sequence when wrong symbols carry more than uniform mass, so the
/// value is clamped to the valid range.
pub fn effective_epsilon(priors: &LeafPriors, x0: &[Symbol]) -> f64 {
    debug_assert_eq!(priors.len(), x0.len());
    let v = priors.vocab();
    if v < 2 || priors.is_empty() {
        return 0.0;
    }
    let mut wrong_mass = 0.0;
    for (i, &x) in x0.iter().enumerate() {
        wrong_mass += 1.0 - priors.row(i)[x as usize];
    }
    let mean = wrong_mass / (priors.len() * (v - 1)) as f64;
    (v as f64 * mean).min(1.0)
}

/// CSV serialization of an observation: one row of integers for symbol
/// channels (masked tokens carry the sentinel `v`), or `d` rows of `v`
/// floats with 17 significant digits for the continuous channel.
pub fn observation_to_csv(obs: &NoisyObservation) -> String {
    match obs {
        NoisyObservation::Masked(x) | NoisyObservation::Uniform(x) => {
            let mut line = x
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",");
            line.push('\n');
            line
        }
        NoisyObservation::Gaussian(m) => {
            let mut out = String::new();
            for row in m.iter_rows() {
                let fields: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            out
        }
    }
}

/// Cumulative keep probability of the classic linear-beta discrete
/// schedule with `cap_t` steps (`beta` linear from 1e-4 to 0.02).
pub fn linear_beta_alpha_bar(t: usize, cap_t: usize) -> f64 {
    debug_assert!(t <= cap_t && cap_t > 0);
    let (b0, b1) = (1e-4, 0.02);
    let mut acc = 1.0;
    for k in 1..=t {
        let beta = if cap_t == 1 {
            b0
        } else {
            b0 + (b1 - b0) * (k - 1) as f64 / (cap_t - 1) as f64
        };
        acc *= 1.0 - beta;
    }
    acc
}
