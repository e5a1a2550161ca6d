//! Derived scaling cross-checks: the correlation-length exponent against a
//! finite-difference fit of the theory curves, the field baseline's
//! short-distance decay, and the token correlation magnitude against exact
//! enumeration over rule realizations.

use rhm::grammar::{RhmParams, RuleSet};
use rhm::{grf, learnstats, meanfield, seeding};
use rhm_testkit::{oracle, stats};

#[test]
fn xi_exponent_matches_the_curve_fit() {
    // measure the correlation length from the two-leaf theory curves as
    // the distance where the ratio to the critical curve drops below 1/2,
    // then fit log xi against log |eps - eps*|
    let prm = RhmParams::new(16, 4, 2, 16, 0).unwrap();
    let (eps_star, nu) = match meanfield::phase_diagram(&prm) {
        meanfield::Phase::Transition { eps_star, .. } => {
            (eps_star, meanfield::xi_exponent(&prm).unwrap())
        }
        meanfield::Phase::NoInference => unreachable!(),
    };
    let crit = meanfield::correlation_theory(&prm, eps_star, 16).unwrap();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for de in [0.005f64, 0.0075, 0.01, 0.015, 0.02] {
        let rows = meanfield::correlation_theory(&prm, eps_star - de, 16).unwrap();
        let mut xi = None;
        for k in 1..rows.len() {
            let ratio = rows[k].connected / crit[k].connected;
            if ratio < 0.5 {
                let prev = rows[k - 1].connected / crit[k - 1].connected;
                let f = (prev.ln() - (0.5f64).ln()) / (prev.ln() - ratio.ln());
                let lr = rows[k - 1].r.max(0.5).ln()
                    + f * (rows[k].r.ln() - rows[k - 1].r.max(0.5).ln());
                xi = Some(lr.exp());
                break;
            }
        }
        let xi = xi.expect("cutoff inside the tabulated range");
        lx.push(de.ln());
        ly.push(xi.ln());
    }
    let slope = -stats::slope(&lx, &ly);
    assert!(
        (slope / nu - 1.0).abs() <= 0.15,
        "fitted exponent {slope:.3} vs nu = {nu:.3}"
    );
}

#[test]
fn grf_short_distance_decay_follows_the_spectrum() {
    // at full inversion the change field is a fresh draw, and the
    // correlation of change magnitudes decays with twice the covariance
    // exponent: slope 2(a - 1) in one dimension
    let a = 0.5;
    let spec = grf::GrfSpec::new(256, a).unwrap();
    let obs = grf::observables(&spec, 0.0, 128, 8, 7).unwrap();
    let prof = obs.table.radial_profile();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in &prof {
        if p.r >= 2 && p.r <= 16 && p.c_raw > 0.0 {
            xs.push((p.r as f64).ln());
            ys.push(p.c_raw.ln());
        }
    }
    let slope = stats::slope(&xs, &ys);
    let predicted = 2.0 * (a - 1.0);
    assert!(
        (slope - predicted).abs() <= 0.5,
        "measured slope {slope:.3} vs predicted {predicted:.3}"
    );
}

#[test]
fn correlation_magnitude_matches_enumeration_over_realizations() {
    // exact token-tuple correlations per realization (no sampling noise),
    // root-mean-squared over 64 realizations, against the closed form
    let base = RhmParams::new(8, 2, 2, 2, 0).unwrap();
    let mut sq_sum = 0.0f64;
    let mut n_entries = 0usize;
    for trial in 0..64u64 {
        let seed = u64::from_le_bytes(
            seeding::stream_seed(0, "c2-real", trial)[..8].try_into().unwrap(),
        );
        let prm = RhmParams { seed, ..base };
        let rules = RuleSet::generate(prm).unwrap();
        let trees = oracle::enumerate_trees(&rules);
        let w = 1.0 / trees.len() as f64;
        let mut joint = std::collections::HashMap::new();
        let mut p_tok = vec![0.0f64; 8];
        let mut p_tup = std::collections::HashMap::new();
        for t in &trees {
            let tok = t.leaves()[0] as usize;
            let tup = (t.leaves()[2], t.leaves()[3]);
            *joint.entry((tok, tup)).or_insert(0.0) += w;
            p_tok[tok] += w;
            *p_tup.entry(tup).or_insert(0.0) += w;
        }
        for (&tup, &pt) in &p_tup {
            for tok in 0..8 {
                let j = joint.get(&(tok, tup)).copied().unwrap_or(0.0);
                let c = j - p_tok[tok] * pt;
                sq_sum += c * c;
                n_entries += 1;
            }
        }
    }
    let measured = (sq_sum / n_entries as f64).sqrt();
    let predicted = learnstats::theoretical_correlation_magnitude(&base, 1);
    let ratio = measured / predicted;
    assert!(
        (0.5..=2.0).contains(&ratio),
        "measured {measured:.3e} vs predicted {predicted:.3e} (ratio {ratio:.3})"
    );
}
