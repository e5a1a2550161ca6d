//! Sampling measure and counting cross-checked against enumeration.

use num_bigint::BigUint;
use rhm::grammar::{count_strings_per_class, sample_tree, RhmParams, RuleSet};
use rhm::seeding;
use rhm_testkit::{oracle, stats};

#[test]
fn string_counts_match_enumeration_cardinality() {
    for (v, m, s, depth) in [(2usize, 2usize, 2usize, 2usize), (3, 2, 2, 2), (3, 1, 2, 2), (2, 2, 2, 1)] {
        let p = RhmParams::new(v, m, s, depth, 1).unwrap();
        let rules = RuleSet::generate(p).unwrap();
        let dist = oracle::unconditional_string_distribution(&rules);
        // every class contributes the same count, and every derivation
        // yields a distinct string
        let per_class = count_strings_per_class(&p);
        assert_eq!(
            BigUint::from(dist.len()),
            per_class.clone() * BigUint::from(v),
            "v={v} m={m}"
        );
    }
}

#[test]
fn sampler_matches_the_uniform_measure_per_class() {
    // fixed class: 10^5 draws against the enumerated uniform distribution
    let p = RhmParams::new(2, 2, 2, 2, 3).unwrap();
    let rules = RuleSet::generate(p).unwrap();
    let root = 0u16;
    let mut root_prior = vec![0.0; 2];
    root_prior[root as usize] = 1.0;

    let mut keys: Vec<Vec<u16>> = oracle::enumerate_trees(&rules)
        .into_iter()
        .filter(|t| t.root() == root)
        .map(|t| t.leaves().to_vec())
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 8);

    let draws = 100_000u64;
    let mut counts = std::collections::HashMap::new();
    let mut rng = seeding::stream(3, "measure", 0);
    for _ in 0..draws {
        let tree = sample_tree(&rules, Some(root), &mut rng);
        *counts.entry(tree.leaves().to_vec()).or_insert(0u64) += 1;
    }
    let observed: Vec<u64> = keys.iter().map(|k| counts[k]).collect();
    assert_eq!(observed.iter().sum::<u64>(), draws);
    let probs = vec![1.0 / 8.0; 8];
    let sigma = stats::max_multinomial_sigma(&observed, &probs);
    assert!(sigma < 3.0, "max deviation {sigma:.2} sigma");
}

#[test]
fn sampler_matches_the_unconditional_measure() {
    for (v, m, seed) in [(2usize, 2usize, 4u64), (3, 2, 5)] {
        let p = RhmParams::new(v, m, 2, 2, seed).unwrap();
        let rules = RuleSet::generate(p).unwrap();
        let exact = oracle::unconditional_string_distribution(&rules);
        let mut keys: Vec<_> = exact.keys().cloned().collect();
        keys.sort();

        let draws = 50_000u64;
        let mut counts = std::collections::HashMap::new();
        let mut rng = seeding::stream(seed, "measure", 1);
        for _ in 0..draws {
            let tree = sample_tree(&rules, None, &mut rng);
            *counts.entry(tree.leaves().to_vec()).or_insert(0u64) += 1;
        }
        let observed: Vec<u64> = keys.iter().map(|k| *counts.get(k).unwrap_or(&0)).collect();
        assert_eq!(observed.iter().sum::<u64>(), draws, "strings outside the enumerated support");
        let probs: Vec<f64> = keys.iter().map(|k| exact[k]).collect();
        let (stat, df) = stats::chi2_gof(&observed, &probs);
        let pval = stats::chi2_pvalue(stat, df);
        assert!(pval > 0.01, "v={v} m={m}: chi2 {stat:.1}, df {df}, p {pval:.4}");
    }
}
