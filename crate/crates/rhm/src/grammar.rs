//! Random hierarchy grammars: construction, sampling, counting, parsing
//! and one-hot encoding.
//!
//! An instance is a probabilistic context-free grammar on a regular tree
//! of depth `depth` and branching factor `s`. Every level has the same
//! vocabulary `0..v`. Each symbol at level `l` owns exactly `m` distinct
//! production tuples of `s` level-`(l-1)` symbols, and no tuple is shared
//! between two symbols, so bottom-up parsing is deterministic.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding;

/// Symbol value; every level uses the vocabulary `0..v`.
pub type Symbol = u16;

/// Parameters of one grammar instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhmParams {
    /// Vocabulary size per level.
    pub v: usize,
    /// Synonymous productions per symbol.
    pub m: usize,
    /// Branching factor (tuple length).
    pub s: usize,
    /// Tree depth; leaves live at level 0, the class at level `depth`.
    pub depth: usize,
    /// Master seed for rule construction.
    pub seed: u64,
}

impl RhmParams {
    pub fn new(v: usize, m: usize, s: usize, depth: usize, seed: u64) -> Result<Self> {
        let p = RhmParams { v, m, s, depth, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v < 2 {
            return Err(Error::InvalidParams(format!("v = {} < 2", self.v)));
        }
        if self.m < 1 {
            return Err(Error::InvalidParams("m = 0".into()));
        }
        if self.s < 2 {
            return Err(Error::InvalidParams(format!("s = {} < 2", self.s)));
        }
        if self.depth < 1 {
            return Err(Error::InvalidParams("depth = 0".into()));
        }
        if self.v > Symbol::MAX as usize {
            return Err(Error::InvalidParams(format!(
                "v = {} exceeds the symbol range",
                self.v
            )));
        }
        // m*v distinct tuples must fit in the v^s possible ones.
        if let Some(space) = self.tuple_space() {
            if (self.m as u128) * (self.v as u128) > space {
                return Err(Error::InvalidParams(format!(
                    "m*v = {} exceeds v^s = {}",
                    self.m * self.v,
                    space
                )));
            }
        }
        if self.leaf_count_checked().is_none() {
            return Err(Error::InvalidParams(format!(
                "s^depth = {}^{} does not fit in usize",
                self.s, self.depth
            )));
        }
        Ok(())
    }

    /// `v^s`, or `None` on overflow (then any `m*v` fits).
    fn tuple_space(&self) -> Option<u128> {
        (self.v as u128).checked_pow(self.s as u32)
    }

    fn leaf_count_checked(&self) -> Option<usize> {
        self.s.checked_pow(self.depth as u32)
    }

    /// Leaf count `d = s^depth`.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count_checked().expect("validated")
    }

    /// Number of nodes at a level: `s^(depth - level)`.
    pub fn nodes_at(&self, level: usize) -> usize {
        debug_assert!(level <= self.depth);
        self.s.pow((self.depth - level) as u32)
    }

    /// Rule density `(m*v - 1) / (v^s - 1)`: the probability that a fixed
    /// non-reference tuple is among the chosen ones.
    pub fn f_exact(&self) -> f64 {
        let space = self.tuple_space().expect("validated desk-scale params") as f64;
        ((self.m * self.v) as f64 - 1.0) / (space - 1.0)
    }

    /// Asymptotic rule density `m / v^(s-1)`.
    pub fn f_asym(&self) -> f64 {
        self.m as f64 / (self.v as f64).powi(self.s as i32 - 1)
    }
}

/// Frozen production rules of one instance.
///
/// `levels[l-1]` holds the rules expanding level-`l` symbols into tuples of
/// level-`(l-1)` symbols, plus the inverse (tuple to parent) map.
#[derive(Clone, Debug)]
pub struct RuleSet {
    params: RhmParams,
    levels: Vec<LevelRules>,
}

#[derive(Clone, Debug)]
struct LevelRules {
    /// Flat `[symbol][j][position]` tuple storage, `v*m*s` entries.
    tuples: Vec<Symbol>,
    /// Tuple -> parent symbol; defined exactly on the `m*v` chosen tuples.
    inverse: HashMap<Box<[Symbol]>, Symbol>,
}

impl LevelRules {
    fn tuple(&self, params: &RhmParams, sym: Symbol, j: usize) -> &[Symbol] {
        let s = params.s;
        let base = (sym as usize * params.m + j) * s;
        &self.tuples[base..base + s]
    }
}

/// Current schema version for the JSON serialization.
pub const RULESET_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RuleSetDoc {
    version: u32,
    params: RhmParams,
    /// One map per level (level 1 first): parent symbol -> its m tuples.
    levels: Vec<BTreeMap<String, Vec<Vec<Symbol>>>>,
}

impl RuleSet {
    /// Draws the rules for `params`: at each level, `m*v` distinct tuples
    /// uniformly without replacement, shuffled and split into `v` groups
    /// of `m`, group `y` assigned to parent symbol `y`.
    pub fn generate(params: RhmParams) -> Result<Self> {
        params.validate()?;
        let levels = (1..=params.depth)
            .map(|level| {
                let mut rng = seeding::stream(params.seed, "rules", level as u64);
                Self::generate_level(&params, &mut rng)
            })
            .collect();
        Ok(RuleSet { params, levels })
    }

    fn generate_level(params: &RhmParams, rng: &mut impl Rng) -> LevelRules {
        let n = params.m * params.v;
        let mut seen: HashSet<Vec<Symbol>> = HashSet::with_capacity(n);
        let mut chosen: Vec<Vec<Symbol>> = Vec::with_capacity(n);
        while chosen.len() < n {
            let t: Vec<Symbol> = (0..params.s)
                .map(|_| rng.random_range(0..params.v) as Symbol)
                .collect();
            if seen.insert(t.clone()) {
                chosen.push(t);
            }
        }
        chosen.shuffle(rng);

        let mut tuples = Vec::with_capacity(n * params.s);
        let mut inverse = HashMap::with_capacity(n);
        for (idx, t) in chosen.iter().enumerate() {
            let parent = (idx / params.m) as Symbol;
            tuples.extend_from_slice(t);
            inverse.insert(t.clone().into_boxed_slice(), parent);
        }
        LevelRules { tuples, inverse }
    }

    pub fn params(&self) -> &RhmParams {
        &self.params
    }

    /// The `j`-th tuple produced by `sym` at `level` (1-based level).
    pub fn tuple(&self, level: usize, sym: Symbol, j: usize) -> &[Symbol] {
        self.levels[level - 1].tuple(&self.params, sym, j)
    }

    /// Parent of a tuple at `level`, or `None` if the tuple is not a rule.
    pub fn parent_of(&self, level: usize, tuple: &[Symbol]) -> Option<Symbol> {
        self.levels[level - 1].inverse.get(tuple).copied()
    }

    /// Number of distinct tuples stored at `level` (must equal `m*v`).
    pub fn tuple_count(&self, level: usize) -> usize {
        self.levels[level - 1].inverse.len()
    }

    /// Versioned JSON document; byte-stable for fixed `(params, seed)`.
    pub fn to_json(&self) -> String {
        let levels = self
            .levels
            .iter()
            .map(|lev| {
                let mut map = BTreeMap::new();
                for y in 0..self.params.v {
                    let tuples: Vec<Vec<Symbol>> = (0..self.params.m)
                        .map(|j| lev.tuple(&self.params, y as Symbol, j).to_vec())
                        .collect();
                    map.insert(y.to_string(), tuples);
                }
                map
            })
            .collect();
        let doc = RuleSetDoc {
            version: RULESET_SCHEMA_VERSION,
            params: self.params,
            levels,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    /// Parses and fully re-validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RuleSetDoc = serde_json::from_str(text)?;
        if doc.version != RULESET_SCHEMA_VERSION {
            return Err(Error::MalformedRules(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        doc.params.validate()?;
        let p = doc.params;
        if doc.levels.len() != p.depth {
            return Err(Error::MalformedRules(format!(
                "expected {} levels, got {}",
                p.depth,
                doc.levels.len()
            )));
        }
        let mut levels = Vec::with_capacity(p.depth);
        for (li, map) in doc.levels.iter().enumerate() {
            let mut tuples = vec![0 as Symbol; p.v * p.m * p.s];
            let mut inverse = HashMap::with_capacity(p.v * p.m);
            if map.len() != p.v {
                return Err(Error::MalformedRules(format!(
                    "level {}: expected {} parents, got {}",
                    li + 1,
                    p.v,
                    map.len()
                )));
            }
            for (key, tlist) in map {
                let y: usize = key
                    .parse()
                    .map_err(|_| Error::MalformedRules(format!("bad parent key {key:?}")))?;
                if y >= p.v {
                    return Err(Error::MalformedRules(format!("parent {y} out of range")));
                }
                if tlist.len() != p.m {
                    return Err(Error::MalformedRules(format!(
                        "parent {y}: expected {} tuples, got {}",
                        p.m,
                        tlist.len()
                    )));
                }
                for (j, t) in tlist.iter().enumerate() {
                    if t.len() != p.s || t.iter().any(|&x| (x as usize) >= p.v) {
                        return Err(Error::MalformedRules(format!(
                            "parent {y} tuple {j} malformed"
                        )));
                    }
                    let base = (y * p.m + j) * p.s;
                    tuples[base..base + p.s].copy_from_slice(t);
                    if inverse
                        .insert(t.clone().into_boxed_slice(), y as Symbol)
                        .is_some()
                    {
                        return Err(Error::MalformedRules(format!(
                            "level {}: duplicate tuple {t:?}",
                            li + 1
                        )));
                    }
                }
            }
            levels.push(LevelRules { tuples, inverse });
        }
        Ok(RuleSet { params: p, levels })
    }
}

/// One complete derivation: symbol values at every node.
///
/// `level(l)` has `s^(depth-l)` entries; `level(depth)` is the single root
/// (the class) and `level(0)` the visible string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleTree {
    levels: Vec<Vec<Symbol>>,
}

impl SampleTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &[Symbol] {
        &self.levels[l]
    }

    pub fn leaves(&self) -> &[Symbol] {
        &self.levels[0]
    }

    pub fn root(&self) -> Symbol {
        self.levels[self.depth()][0]
    }

    pub fn from_levels(levels: Vec<Vec<Symbol>>) -> Self {
        SampleTree { levels }
    }
}

/// Ancestral sample of one derivation; every expansion is uniform over the
/// `m` rules of its symbol. `root = None` draws the class uniformly.
pub fn sample_tree(rules: &RuleSet, root: Option<Symbol>, rng: &mut impl Rng) -> SampleTree {
    let p = *rules.params();
    let root = root.unwrap_or_else(|| rng.random_range(0..p.v) as Symbol);
    debug_assert!((root as usize) < p.v);
    let mut levels = vec![Vec::new(); p.depth + 1];
    levels[p.depth] = vec![root];
    for l in (0..p.depth).rev() {
        let mut row = vec![0 as Symbol; p.nodes_at(l)];
        for (i, &parent) in levels[l + 1].iter().enumerate() {
            let j = rng.random_range(0..p.m);
            row[i * p.s..(i + 1) * p.s].copy_from_slice(rules.tuple(l + 1, parent, j));
        }
        levels[l] = row;
    }
    SampleTree { levels }
}

/// Exact count of distinct strings per class: `m^((s^depth - 1)/(s - 1))`.
pub fn count_strings_per_class(params: &RhmParams) -> BigUint {
    let mut exponent: u64 = 0;
    let mut pw: u64 = 1;
    for _ in 0..params.depth {
        exponent += pw;
        pw *= params.s as u64;
    }
    BigUint::from(params.m).pow(u32::try_from(exponent).expect("desk-scale depth"))
}

/// Per-level outcome of a bottom-up parse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    /// `valid[l-1]`: every tuple encountered at level `l` was a rule.
    /// Once a level fails, all higher levels are reported invalid since the
    /// parse cannot proceed.
    pub valid: Vec<bool>,
    /// Reconstructed symbols per parsed level (index `l`, only while valid).
    pub parsed: Vec<Vec<Symbol>>,
}

impl ValidationReport {
    pub fn all_valid(&self) -> bool {
        self.valid.iter().all(|&b| b)
    }
}

/// Deterministic bottom-up parse of a leaf string using the inverse maps.
pub fn validate_levels(rules: &RuleSet, leaves: &[Symbol]) -> Result<ValidationReport> {
    let p = rules.params();
    if leaves.len() != p.leaf_count() {
        return Err(Error::LengthMismatch {
            expected: p.leaf_count(),
            got: leaves.len(),
        });
    }
    let mut valid = vec![false; p.depth];
    let mut parsed = vec![leaves.to_vec()];
    let mut current = leaves.to_vec();
    for l in 1..=p.depth {
        let mut parents = Vec::with_capacity(current.len() / p.s);
        let mut ok = true;
        for chunk in current.chunks_exact(p.s) {
            match rules.parent_of(l, chunk) {
                Some(y) => parents.push(y),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        valid[l - 1] = true;
        parsed.push(parents.clone());
        current = parents;
    }
    Ok(ValidationReport { valid, parsed })
}

/// Full parse into a [`SampleTree`]; `None` unless valid at every level.
pub fn parse_tree(rules: &RuleSet, leaves: &[Symbol]) -> Result<Option<SampleTree>> {
    let report = validate_levels(rules, leaves)?;
    Ok(if report.all_valid() {
        Some(SampleTree {
            levels: report.parsed,
        })
    } else {
        None
    })
}

/// Symbols a given node can take under the frozen rules, by walking the
/// reachable sets down from the root (where every symbol is allowed).
/// Sparse instances can leave some symbols unreachable at some positions.
pub fn reachable_symbols(rules: &RuleSet, level: usize, index: usize) -> Vec<Symbol> {
    let p = rules.params();
    debug_assert!(level <= p.depth && index < p.nodes_at(level));
    let mut reach: Vec<bool> = vec![true; p.v];
    // path from the root down to the node
    let mut path = Vec::new();
    let mut i = index;
    for _ in level..p.depth {
        path.push(i % p.s);
        i /= p.s;
    }
    for l in (level..p.depth).rev() {
        let pos = path[l - level];
        let mut next = vec![false; p.v];
        for y in 0..p.v {
            if !reach[y] {
                continue;
            }
            for j in 0..p.m {
                next[rules.tuple(l + 1, y as Symbol, j)[pos] as usize] = true;
            }
        }
        reach = next;
    }
    reach
        .iter()
        .enumerate()
        .filter_map(|(y, &ok)| ok.then_some(y as Symbol))
        .collect()
}

/// Fraction of reports valid at each level, `index = level - 1`.
pub fn level_accuracy(reports: &[ValidationReport]) -> Vec<f64> {
    if reports.is_empty() {
        return Vec::new();
    }
    let depth = reports[0].valid.len();
    (0..depth)
        .map(|i| reports.iter().filter(|r| r.valid[i]).count() as f64 / reports.len() as f64)
        .collect()
}

/// One-hot encoding of a leaf string, one row per position.
#[derive(Clone, Debug, PartialEq)]
pub struct OneHotSequence(Matrix);

impl OneHotSequence {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

pub fn encode_onehot(leaves: &[Symbol], v: usize) -> Result<OneHotSequence> {
    let mut m = Matrix::zeros(leaves.len(), v);
    for (i, &x) in leaves.iter().enumerate() {
        if (x as usize) >= v {
            return Err(Error::InvalidParams(format!(
                "symbol {x} out of vocabulary 0..{v}"
            )));
        }
        m.row_mut(i)[x as usize] = 1.0;
    }
    Ok(OneHotSequence(m))
}

/// Inverse of [`encode_onehot`]; rejects any row that is not exactly one-hot.
pub fn decode_onehot(m: &Matrix) -> Result<Vec<Symbol>> {
    let mut out = Vec::with_capacity(m.rows());
    for (i, row) in m.iter_rows().enumerate() {
        let mut hit = None;
        for (a, &x) in row.iter().enumerate() {
            if x == 1.0 {
                if hit.is_some() {
                    return Err(Error::MalformedMatrix(i));
                }
                hit = Some(a as Symbol);
            } else if x != 0.0 {
                return Err(Error::MalformedMatrix(i));
            }
        }
        out.push(hit.ok_or(Error::MalformedMatrix(i))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(v: usize, m: usize, s: usize, depth: usize, seed: u64) -> RhmParams {
        RhmParams::new(v, m, s, depth, seed).unwrap()
    }

    #[test]
    fn minimal_instance_has_total_inverse() {
        let rules = RuleSet::generate(params(2, 1, 2, 1, 0)).unwrap();
        assert_eq!(rules.tuple_count(1), 2);
        for y in 0..2u16 {
            let t = rules.tuple(1, y, 0).to_vec();
            assert_eq!(rules.parent_of(1, &t), Some(y));
        }
    }

    #[test]
    fn rejects_overfull_rule_budget() {
        assert!(RhmParams::new(2, 3, 2, 1, 0).is_err()); // 6 > 4
        assert!(RhmParams::new(2, 2, 2, 1, 0).is_ok()); // 4 == 4
    }

    #[test]
    fn paper_scale_instance_distinct_per_level() {
        let p = params(32, 8, 2, 10, 1);
        let rules = RuleSet::generate(p).unwrap();
        for l in 1..=10 {
            assert_eq!(rules.tuple_count(l), 256, "level {l}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = params(5, 3, 2, 3, 42);
        let a = RuleSet::generate(p).unwrap().to_json();
        let b = RuleSet::generate(p).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let p = params(4, 2, 2, 2, 9);
        let rules = RuleSet::generate(p).unwrap();
        let text = rules.to_json();
        let back = RuleSet::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn from_json_rejects_duplicate_tuple() {
        let p = params(2, 1, 2, 1, 0);
        let rules = RuleSet::generate(p).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&rules.to_json()).unwrap();
        let t0 = doc["levels"][0]["0"][0].clone();
        doc["levels"][0]["1"][0] = t0;
        let err = RuleSet::from_json(&doc.to_string()).unwrap_err();
        assert!(matches!(err, Error::MalformedRules(_)));
    }

    #[test]
    fn m1_derivation_is_unique() {
        let p = params(3, 1, 2, 3, 7);
        let rules = RuleSet::generate(p).unwrap();
        let mut r1 = seeding::stream(1, "t", 0);
        let mut r2 = seeding::stream(2, "t", 0);
        let a = sample_tree(&rules, Some(1), &mut r1);
        let b = sample_tree(&rules, Some(1), &mut r2);
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_root_is_kept() {
        let rules = RuleSet::generate(params(4, 2, 2, 2, 3)).unwrap();
        for i in 0..20 {
            let mut rng = seeding::stream(5, "t", i);
            assert_eq!(sample_tree(&rules, Some(0), &mut rng).root(), 0);
        }
    }

    #[test]
    fn string_counts() {
        assert_eq!(
            count_strings_per_class(&params(3, 2, 2, 2, 0)),
            BigUint::from(8u32)
        );
        assert_eq!(
            count_strings_per_class(&params(3, 1, 2, 4, 0)),
            BigUint::from(1u32)
        );
        assert_eq!(
            count_strings_per_class(&params(8, 4, 2, 3, 0)),
            BigUint::from(16384u32)
        );
        // depth 10, s = 2: m^1023 needs big integers
        let big = count_strings_per_class(&params(32, 8, 2, 10, 0));
        assert_eq!(big, BigUint::from(8u32).pow(1023));
    }

    #[test]
    fn sampled_trees_validate() {
        let rules = RuleSet::generate(params(4, 2, 2, 3, 11)).unwrap();
        for i in 0..50 {
            let mut rng = seeding::stream(11, "sample", i);
            let tree = sample_tree(&rules, None, &mut rng);
            let rep = validate_levels(&rules, tree.leaves()).unwrap();
            assert!(rep.all_valid());
            assert_eq!(rep.parsed.last().unwrap()[0], tree.root());
        }
    }

    #[test]
    fn single_bad_token_breaks_level_one() {
        // v^s > m*v so invalid tuples exist; find a corruption of the first
        // tuple that leaves the rule domain.
        let rules = RuleSet::generate(params(3, 2, 2, 2, 13)).unwrap();
        let mut rng = seeding::stream(13, "sample", 0);
        let tree = sample_tree(&rules, None, &mut rng);
        let leaves = tree.leaves().to_vec();
        let hit = (0..leaves.len())
            .flat_map(|pos| (0..3u16).map(move |c| (pos, c)))
            .find(|&(pos, c)| {
                let tuple_start = pos - pos % 2;
                let mut t = [leaves[tuple_start], leaves[tuple_start + 1]];
                t[pos % 2] = c;
                rules.parent_of(1, &t).is_none()
            });
        let (pos, c) = hit.expect("some single-token corruption leaves the rule domain");
        let mut corrupted = leaves.clone();
        corrupted[pos] = c;
        let rep = validate_levels(&rules, &corrupted).unwrap();
        assert!(!rep.valid[0]);
        assert!(!rep.all_valid());
    }

    #[test]
    fn length_mismatch_is_reported() {
        let rules = RuleSet::generate(params(3, 2, 2, 2, 13)).unwrap();
        assert!(matches!(
            validate_levels(&rules, &[0, 1, 2]),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn random_string_level_one_acceptance_rate() {
        // One fixed realization stores exactly m*v of the v^s tuples, so a
        // uniform random tuple parses with probability 1/4 here and a full
        // string with probability (1/4)^(d/2).
        let p = params(32, 8, 2, 3, 17);
        let rules = RuleSet::generate(p).unwrap();
        let d = p.leaf_count();
        let n = 100_000usize;
        let mut rng = seeding::stream(17, "uniform-strings", 0);
        let mut hits = 0usize;
        for _ in 0..n {
            let leaves: Vec<Symbol> =
                (0..d).map(|_| rng.random_range(0..p.v) as Symbol).collect();
            if validate_levels(&rules, &leaves).unwrap().valid[0] {
                hits += 1;
            }
        }
        let p_hit = 0.25f64.powi((d / 2) as i32);
        let sigma = (n as f64 * p_hit * (1.0 - p_hit)).sqrt();
        let expected = n as f64 * p_hit;
        assert!(
            (hits as f64 - expected).abs() <= 3.0 * sigma,
            "hits = {hits}, expected {expected:.1} +- {sigma:.1}"
        );
    }

    #[test]
    fn reachability_is_read_off_the_rules() {
        // at the root everything is reachable; below, exactly the symbols
        // appearing at the node's position in some reachable production
        let p = params(4, 1, 2, 2, 2);
        let rules = RuleSet::generate(p).unwrap();
        assert_eq!(reachable_symbols(&rules, 2, 0).len(), 4);
        for node in 0..2usize {
            let reach = reachable_symbols(&rules, 1, node);
            let mut expect: Vec<Symbol> = (0..4u16)
                .map(|y| rules.tuple(2, y, 0)[node])
                .collect();
            expect.sort_unstable();
            expect.dedup();
            assert_eq!(reach, expect, "node {node}");
        }
        // sampled trees only ever hold reachable symbols
        let dense = RuleSet::generate(params(3, 2, 2, 3, 4)).unwrap();
        for i in 0..20 {
            let mut rng = seeding::stream(4, "reach", i);
            let tree = sample_tree(&dense, None, &mut rng);
            for l in 0..=3 {
                for (node, &x) in tree.level(l).iter().enumerate() {
                    assert!(reachable_symbols(&dense, l, node).contains(&x));
                }
            }
        }
    }

    #[test]
    fn onehot_round_trip_and_errors() {
        let x = vec![0u16, 1];
        let enc = encode_onehot(&x, 2).unwrap();
        assert_eq!(enc.matrix().row(0), &[1.0, 0.0]);
        assert_eq!(enc.matrix().row(1), &[0.0, 1.0]);
        assert_eq!(decode_onehot(enc.matrix()).unwrap(), x);

        let bad = Matrix::from_rows(vec![vec![0.5, 0.5]]);
        assert!(matches!(decode_onehot(&bad), Err(Error::MalformedMatrix(0))));
        let two = Matrix::from_rows(vec![vec![1.0, 1.0]]);
        assert!(matches!(decode_onehot(&two), Err(Error::MalformedMatrix(0))));
    }

    #[test]
    fn f_values() {
        let p = params(32, 8, 2, 10, 0);
        assert!((p.f_exact() - 255.0 / 1023.0).abs() < 1e-15);
        assert!((p.f_asym() - 0.25).abs() < 1e-15);
        assert_eq!(p.leaf_count(), 1024);
    }
}
