//! Brute-force posteriors by full enumeration of derivations.
//!
//! Only feasible for tiny instances; used as the independent reference for
//! the message-passing implementation. Nothing here calls the inference
//! code: weights come straight from the generative definition.

use std::collections::HashMap;

use rhm::grammar::{RuleSet, SampleTree, Symbol};
use rhm::noise::LeafPriors;

/// All derivation trees of an instance, every rule choice enumerated.
pub fn enumerate_trees(rules: &RuleSet) -> Vec<SampleTree> {
    let p = *rules.params();
    let internal: usize = (1..=p.depth).map(|l| p.nodes_at(l)).sum();
    let mut codes: u64 = 1;
    for _ in 0..internal {
        codes = codes
            .checked_mul(p.m as u64)
            .expect("instance too large to enumerate");
        assert!(codes <= 50_000_000, "instance too large to enumerate");
    }

    let mut trees = Vec::with_capacity(p.v * codes as usize);
    for root in 0..p.v {
        for mut code in 0..codes {
            let mut levels = vec![Vec::new(); p.depth + 1];
            levels[p.depth] = vec![root as Symbol];
            // consume choice digits top-down, left-to-right
            for l in (0..p.depth).rev() {
                let mut row = vec![0 as Symbol; p.nodes_at(l)];
                let parents = levels[l + 1].clone();
                for (i, &parent) in parents.iter().enumerate() {
                    let j = (code % p.m as u64) as usize;
                    code /= p.m as u64;
                    row[i * p.s..(i + 1) * p.s].copy_from_slice(rules.tuple(l + 1, parent, j));
                }
                levels[l] = row;
            }
            trees.push(SampleTree::from_levels(levels));
        }
    }
    trees
}

/// Unnormalized posterior weight of one derivation given leaf beliefs and a
/// root prior. The uniform `1/m` rule factors are constant across trees and
/// cancel in every normalized quantity.
fn weight(tree: &SampleTree, priors: &LeafPriors, root_prior: Option<&[f64]>) -> f64 {
    let mut w = match root_prior {
        Some(prior) => prior[tree.root() as usize],
        None => 1.0,
    };
    for (i, &x) in tree.leaves().iter().enumerate() {
        w *= priors.row(i)[x as usize];
    }
    w
}

/// Exact posterior marginals for every node: `out[level][node][symbol]`.
pub fn posterior_node_marginals(
    rules: &RuleSet,
    priors: &LeafPriors,
    root_prior: Option<&[f64]>,
) -> Vec<Vec<Vec<f64>>> {
    let p = *rules.params();
    let mut acc: Vec<Vec<Vec<f64>>> = (0..=p.depth)
        .map(|l| vec![vec![0.0; p.v]; p.nodes_at(l)])
        .collect();
    let mut total = 0.0;
    for tree in enumerate_trees(rules) {
        let w = weight(&tree, priors, root_prior);
        if w == 0.0 {
            continue;
        }
        total += w;
        for l in 0..=p.depth {
            for (i, &x) in tree.level(l).iter().enumerate() {
                acc[l][i][x as usize] += w;
            }
        }
    }
    assert!(total > 0.0, "evidence incompatible with every derivation");
    for level in &mut acc {
        for node in level {
            for x in node.iter_mut() {
                *x /= total;
            }
        }
    }
    acc
}

/// Exact posterior over leaf strings. Distinct derivations yield distinct
/// strings (parses are unique), so this is also the posterior over trees.
pub fn posterior_string_distribution(
    rules: &RuleSet,
    priors: &LeafPriors,
    root_prior: Option<&[f64]>,
) -> HashMap<Vec<Symbol>, f64> {
    let mut dist = HashMap::new();
    let mut total = 0.0;
    for tree in enumerate_trees(rules) {
        let w = weight(&tree, priors, root_prior);
        if w > 0.0 {
            total += w;
            *dist.entry(tree.leaves().to_vec()).or_insert(0.0) += w;
        }
    }
    for w in dist.values_mut() {
        *w /= total;
    }
    dist
}

/// Generative (unconditional) distribution over leaf strings: uniform over
/// all derivations.
pub fn unconditional_string_distribution(rules: &RuleSet) -> HashMap<Vec<Symbol>, f64> {
    let trees = enumerate_trees(rules);
    let w = 1.0 / trees.len() as f64;
    let mut dist = HashMap::new();
    for tree in trees {
        *dist.entry(tree.leaves().to_vec()).or_insert(0.0) += w;
    }
    dist
}

/// Exact conditional expectation of the one-hot context token(s) given a
/// patch value, from the unconditional measure. `patch` selects leaf
/// positions whose joint value is conditioned on; `context` the positions
/// averaged. Returns `value tuple -> (mean one-hot concatenation, prob)`.
pub fn exact_context_vectors(
    rules: &RuleSet,
    patch: &[usize],
    context: &[usize],
) -> HashMap<Vec<Symbol>, (Vec<f64>, f64)> {
    let p = *rules.params();
    let trees = enumerate_trees(rules);
    let w = 1.0 / trees.len() as f64;
    let mut acc: HashMap<Vec<Symbol>, (Vec<f64>, f64)> = HashMap::new();
    for tree in &trees {
        let key: Vec<Symbol> = patch.iter().map(|&i| tree.leaves()[i]).collect();
        let entry = acc
            .entry(key)
            .or_insert_with(|| (vec![0.0; context.len() * p.v], 0.0));
        for (k, &ci) in context.iter().enumerate() {
            entry.0[k * p.v + tree.leaves()[ci] as usize] += w;
        }
        entry.1 += w;
    }
    for (mean, prob) in acc.values_mut() {
        for x in mean.iter_mut() {
            *x /= *prob;
        }
    }
    acc
}
