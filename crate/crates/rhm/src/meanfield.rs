//! Annealed (mean-field) theory of the denoising process.
//!
//! Averaging the message updates over rule realizations collapses each
//! level to two scalars: the mean upward belief `p_l` and mean downward
//! belief `q_l` in the original symbol. The upward map `F` and downward map
//! `G` drive them level by level; their fixed-point structure decides
//! whether the class survives noise, and the linearization around the
//! repulsive fixed point sets the correlation-length exponent.
//!
//! All algebra here uses the exact rule density `f = (mv-1)/(v^s-1)`; the
//! asymptotic `m/v^(s-1)` appears only in the learnability formulas of
//! [`crate::learnstats`].

use crate::error::{Error, Result};
use crate::grammar::RhmParams;

fn check_prob(name: &'static str, x: f64, lo: f64) -> Result<()> {
    if !(lo - 1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(Error::range(name, x, "[1/v, 1]"));
    }
    Ok(())
}

/// Upward map: mean belief in the correct parent given mean child belief
/// `p`.
///
/// `F(p) = (p^s + f (m-1)/(mv-1) (1-p^s)) / (p^s + f (1-p^s))`
pub fn map_f(p: f64, params: &RhmParams) -> Result<f64> {
    check_prob("p", p, 1.0 / params.v as f64)?;
    let f = params.f_exact();
    let a = f * (params.m as f64 - 1.0) / ((params.m * params.v) as f64 - 1.0);
    let ps = p.powi(params.s as i32);
    Ok((ps + a * (1.0 - ps)) / (ps + f * (1.0 - ps)))
}

/// Derivative of [`map_f`]:
/// `F'(p) = m(v-1)/(mv-1) * f s p^(s-1) / (p^s + f(1-p^s))^2`.
pub fn map_f_prime(p: f64, params: &RhmParams) -> f64 {
    let f = params.f_exact();
    let (m, v, s) = (params.m as f64, params.v as f64, params.s as f64);
    let ps = p.powi(params.s as i32);
    let den = ps + f * (1.0 - ps);
    m * (v - 1.0) / (m * v - 1.0) * f * s * p.powi(params.s as i32 - 1) / (den * den)
}

/// Downward map: mean belief in the correct child given the parent belief
/// `q` and the sibling upward belief `p`.
///
/// Accepts `q` in `[0, 1]`: the conditional-marginal construction in
/// [`correlation_theory`] clamps `q` to 0 or 1, outside the range reachable
/// by the sweep itself.
pub fn map_g(q: f64, p: f64, params: &RhmParams) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&q) {
        return Err(Error::range("q", q, "[0, 1]"));
    }
    check_prob("p", p, 1.0 / params.v as f64)?;
    let f = params.f_exact();
    let (m, v) = (params.m as f64, params.v as f64);
    let rest = f * (m - q) / (m * v - 1.0);
    let ps1 = p.powi(params.s as i32 - 1);
    let num = q * ps1 + rest * (1.0 - ps1);
    Ok(num / (num + (v - 1.0) * rest))
}

/// Mean marginal of the correct symbol from the two beliefs at one node:
/// `p q / (p q + (1-p)(1-q)/(v-1))`. Degenerate zero-mass cases return 0.
pub fn theory_marginal(p_up: f64, q_down: f64, v: usize) -> f64 {
    let num = p_up * q_down;
    let alt = (1.0 - p_up) * (1.0 - q_down) / (v as f64 - 1.0);
    if num == 0.0 {
        return 0.0;
    }
    num / (num + alt)
}

/// Mean upward and downward beliefs per level after a full sweep.
#[derive(Clone, Debug)]
pub struct MeanFieldState {
    /// `p[l]`: upward belief in the correct symbol at level `l`.
    pub p: Vec<f64>,
    /// `q[l]`: downward belief at level `l`; `q[depth] = 1/v`.
    pub q: Vec<f64>,
}

impl MeanFieldState {
    /// Mean marginal of the correct symbol per level. The root entry equals
    /// `p[depth]` by construction.
    pub fn marginals(&self, v: usize) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&p, &q)| theory_marginal(p, q, v))
            .collect()
    }
}

/// Full sweep at corruption level `eps`: upward beliefs first
/// (`p_0 = 1 - eps + eps/v`), then downward from the uniform root belief.
pub fn sweep(params: &RhmParams, eps: f64) -> Result<MeanFieldState> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::range("eps", eps, "[0, 1]"));
    }
    let v = params.v as f64;
    let depth = params.depth;
    let mut p = vec![0.0; depth + 1];
    p[0] = 1.0 - eps + eps / v;
    for l in 0..depth {
        p[l + 1] = map_f(p[l], params)?;
    }
    let mut q = vec![0.0; depth + 1];
    q[depth] = 1.0 / v;
    for l in (1..=depth).rev() {
        q[l - 1] = map_g(q[l], p[l - 1], params)?;
    }
    Ok(MeanFieldState { p, q })
}

/// Fixed-point structure of the upward map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Phase {
    /// `F'(1) < 1`: a repulsive fixed point separates recovery from chance;
    /// the class survives noise below `eps_star`.
    Transition { p_star: f64, eps_star: f64 },
    /// `F'(1) >= 1`: the class is unrecoverable for any positive noise as
    /// the depth diverges.
    NoInference,
}

/// Classifies the instance and, in the transition regime, locates the
/// repulsive fixed point by bisection of `F(p) - p` on `(1/v, 1)` to 1e-12.
///
/// Without synonyms (`m = 1`) the interior root degenerates onto `1/v`
/// itself for every branching factor, so the threshold sits at `eps = 1`
/// and no bisection is needed.
pub fn phase_diagram(params: &RhmParams) -> Phase {
    if map_f_prime(1.0, params) >= 1.0 {
        return Phase::NoInference;
    }
    if params.m == 1 {
        return Phase::Transition {
            p_star: 1.0 / params.v as f64,
            eps_star: 1.0,
        };
    }
    let v = params.v as f64;
    let g = |p: f64| map_f(p, params).expect("p within range") - p;

    // both interval ends are fixed points; nudge inward until the signs
    // bracket the repulsive root
    let width = 1.0 - 1.0 / v;
    let mut delta = 1e-6 * width;
    let (mut lo, mut hi) = loop {
        let lo = 1.0 / v + delta;
        let hi = 1.0 - delta;
        if g(lo) < 0.0 && g(hi) > 0.0 {
            break (lo, hi);
        }
        delta *= 0.5;
        assert!(
            delta > 1e-15 * width,
            "failed to bracket the repulsive fixed point"
        );
    };
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let eps_star = (1.0 - p_star) / (1.0 - 1.0 / v);
    Phase::Transition { p_star, eps_star }
}

/// Correlation-length exponent from a map derivative at the repulsive
/// point: `nu = log s / log F'(p*)`.
pub fn nu_from_derivative(s: usize, f_prime_star: f64) -> f64 {
    (s as f64).ln() / f_prime_star.ln()
}

/// Correlation-length exponent of the instance; requires the transition
/// regime.
pub fn xi_exponent(params: &RhmParams) -> Result<f64> {
    match phase_diagram(params) {
        Phase::Transition { p_star, .. } => {
            let fp = map_f_prime(p_star, params);
            debug_assert!(fp > 1.0, "repulsiveness: F'(p*) = {fp}");
            Ok(nu_from_derivative(params.s, fp))
        }
        Phase::NoInference => Err(Error::InvalidParams(
            "no transition: F'(1) >= 1".into(),
        )),
    }
}

/// Connected spin-spin correlation at one tree distance.
#[derive(Clone, Copy, Debug)]
pub struct TheoryCorrelation {
    /// Tree distance `l` between the two leaves (0 is the on-site term).
    pub tree_dist: usize,
    /// Real-space distance `r = s^l - 1`.
    pub r: f64,
    /// Connected correlation of the change indicators.
    pub connected: f64,
}

/// Mean conditional leaf marginal `P(leaf correct | q at level `at` = c)`,
/// with the upward beliefs taken from `state`.
fn conditional_leaf_marginal(
    params: &RhmParams,
    state: &MeanFieldState,
    at: usize,
    c: f64,
) -> Result<f64> {
    let mut q = c;
    for l in (1..=at).rev() {
        q = map_g(q, state.p[l - 1], params)?;
    }
    Ok(theory_marginal(state.p[0], q, params.v))
}

/// Annealed two-leaf statistics of the change spins.
///
/// For each tree distance the joint law of the two leaf spins is the
/// two-sided propagation `T C T^t` of the sibling joint `C` at the common
/// ancestor, with `T` the conditional leaf marginals. Returns the on-site
/// variance at distance 0 followed by the connected correlations for
/// distances `1..=max_tree_dist`.
pub fn correlation_theory(
    params: &RhmParams,
    eps: f64,
    max_tree_dist: usize,
) -> Result<Vec<TheoryCorrelation>> {
    if max_tree_dist > params.depth {
        return Err(Error::InvalidParams(format!(
            "max_tree_dist {} exceeds depth {}",
            max_tree_dist, params.depth
        )));
    }
    let state = sweep(params, eps)?;
    let v = params.v as f64;
    let m = params.m as f64;
    let f = params.f_exact();
    let marginals = state.marginals(params.v);

    let p_rec0 = marginals[0];
    let mut out = vec![TheoryCorrelation {
        tree_dist: 0,
        r: 0.0,
        connected: 4.0 * p_rec0 * (1.0 - p_rec0),
    }];

    for lt in 1..=max_tree_dist {
        // conditional leaf marginals given the branch state at level lt-1
        let t11 = conditional_leaf_marginal(params, &state, lt - 1, 1.0)?;
        let t12 = conditional_leaf_marginal(params, &state, lt - 1, 0.0)?;

        // sibling joint at level lt-1 conditioned on the ancestor at lt
        let pl = state.p[lt - 1];
        let a = f * (m - 1.0) / (m * v - 1.0);
        let z_rec = pl * pl + a * (1.0 - pl * pl);
        let (rec_cc, rec_cw, rec_ww) = (
            pl * pl / z_rec,
            a * pl * (1.0 - pl) / z_rec,
            a * (1.0 - pl) * (1.0 - pl) / z_rec,
        );
        // wrong ancestor: the m/(mv-1) factors cancel against the
        // normalization, leaving pl/(1+pl) and (1-pl)/(1+pl)
        let (wrg_cc, wrg_cw, wrg_ww) = (0.0, pl / (1.0 + pl), (1.0 - pl) / (1.0 + pl));

        let w = marginals[lt];
        let c11 = w * rec_cc + (1.0 - w) * wrg_cc;
        let c12 = w * rec_cw + (1.0 - w) * wrg_cw;
        let c22 = w * rec_ww + (1.0 - w) * wrg_ww;

        // propagate both sides: P = T C T^t with T = [[t11,t12],[1-t11,1-t12]]
        let t = [[t11, t12], [1.0 - t11, 1.0 - t12]];
        let c = [[c11, c12], [c12, c22]];
        let mut tc = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                tc[i][k] = t[i][0] * c[0][k] + t[i][1] * c[1][k];
            }
        }
        let mut joint = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                joint[i][j] = tc[i][0] * t[j][0] + tc[i][1] * t[j][1];
            }
        }

        // spins: index 0 (reconstructed) is -1, index 1 is +1
        let ss = joint[0][0] - joint[0][1] - joint[1][0] + joint[1][1];
        let pm = joint[0][0] + joint[0][1];
        let mean = 1.0 - 2.0 * pm;
        out.push(TheoryCorrelation {
            tree_dist: lt,
            r: (params.s as f64).powi(lt as i32) - 1.0,
            connected: ss - mean * mean,
        });
    }
    Ok(out)
}
