//! Exact rational-arithmetic oracle: full laws of small trees and
//! compositions, splitting rules, and the sampling-consistency and
//! exchangeability functionals.
//!
//! Everything here enumerates with `BigRational` arithmetic, so checks are
//! true equalities rather than tolerances. Sizes are hard-guarded: rational
//! blow-up past the guards is super-exponential.

use crate::composition::Composition;
use crate::crp::decrement_q;
use crate::params::{Params, Rational};
use crate::trees::{Block, LabeledBinaryTree, TreeShape};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("size {n} exceeds the exact-enumeration guard {max}")]
    SizeGuard { n: u64, max: u64 },
}

pub const MAX_EXACT_TREE_N: u32 = 8;
pub const MAX_EXACT_CRP_N: u64 = 10;

/// A finitely supported exact distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution<K: Ord> {
    support: BTreeMap<K, Rational>,
}

impl<K: Ord + Clone> ExactDistribution<K> {
    pub fn from_map(support: BTreeMap<K, Rational>) -> Self {
        ExactDistribution { support }
    }

    pub fn support(&self) -> &BTreeMap<K, Rational> {
        &self.support
    }

    pub fn prob(&self, key: &K) -> Rational {
        self.support
            .get(key)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.support.values().cloned().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one() && self.support.values().all(|p| !p.is_negative())
    }

    pub fn map_keys<J: Ord + Clone>(&self, f: impl Fn(&K) -> J) -> ExactDistribution<J> {
        let mut out: BTreeMap<J, Rational> = BTreeMap::new();
        for (k, p) in &self.support {
            *out.entry(f(k)).or_insert_with(Rational::zero) += p.clone();
        }
        ExactDistribution { support: out }
    }

    /// Total-variation distance, exact.
    pub fn tv_distance(&self, other: &ExactDistribution<K>) -> Rational {
        let mut keys: Vec<&K> = self.support.keys().collect();
        keys.extend(other.support.keys());
        keys.sort();
        keys.dedup();
        let mut acc = Rational::zero();
        for k in keys {
            let d = self.prob(k) - other.prob(k);
            acc += d.abs();
        }
        acc / Rational::from_integer(BigInt::from(2))
    }
}

/// Exact per-edge selection probabilities of the (α, θ) rule on `t`,
/// keyed by the block below each edge.
pub fn edge_select_probs(t: &LabeledBinaryTree, p: &Params) -> BTreeMap<Block, Rational> {
    let idx = t.index();
    let mut out = BTreeMap::new();
    if t.n() == 1 {
        out.insert(Block::singleton(1), Rational::one());
        return out;
    }
    fn descend(
        idx: &crate::trees::TreeIndex,
        p: &Params,
        node: usize,
        weight: Rational,
        out: &mut BTreeMap<Block, Rational>,
    ) {
        let block = &idx.blocks[node];
        if block.len() == 1 {
            *out.entry(block.clone()).or_insert_with(Rational::zero) += weight;
            return;
        }
        let (with_min, other) = idx.split(node);
        let s = block.len() as i64;
        let m = idx.blocks[other].len() as i64;
        let total = Rational::from_integer(BigInt::from(s - 1)) + p.theta();
        let w_root = p.alpha() / total.clone();
        let w_other = (Rational::from_integer(BigInt::from(m)) - p.alpha()) / total.clone();
        let w_min = (Rational::from_integer(BigInt::from(s - m - 1)) + p.theta()) / total;
        if !w_root.is_zero() {
            *out.entry(block.clone()).or_insert_with(Rational::zero) += weight.clone() * w_root;
        }
        if !w_other.is_zero() {
            descend(idx, p, other, weight.clone() * w_other, out);
        }
        if !w_min.is_zero() {
            descend(idx, p, with_min, weight * w_min, out);
        }
    }
    descend(&idx, p, idx.root, Rational::one(), &mut out);
    out
}

/// Exact per-edge probabilities of the leaf/internal weight rule:
/// 1 − α per leaf edge, α per internal edge.
pub fn ford_edge_probs(t: &LabeledBinaryTree, alpha: &Rational) -> BTreeMap<Block, Rational> {
    let n = t.n() as i64;
    let mut out = BTreeMap::new();
    if n == 1 {
        out.insert(Block::singleton(1), Rational::one());
        return out;
    }
    let total = Rational::from_integer(BigInt::from(n)) - alpha;
    for b in t.blocks() {
        let w = if b.len() == 1 {
            Rational::one() - alpha
        } else {
            alpha.clone()
        };
        out.insert(b.clone(), w / total.clone());
    }
    out
}

/// Insert leaf n+1 on the edge above block `at`, exactly as the growth step
/// does.
pub fn grow_at(t: &LabeledBinaryTree, at: &Block) -> LabeledBinaryTree {
    let n = t.n();
    let new = n + 1;
    let mut blocks = std::collections::BTreeSet::new();
    for b in t.blocks() {
        if at.is_subset_of(b) {
            blocks.insert(b.with_label(new));
        } else {
            blocks.insert(b.clone());
        }
    }
    blocks.insert(at.clone());
    blocks.insert(Block::singleton(new));
    LabeledBinaryTree::from_valid_blocks(blocks, new)
}

/// Exact law of T_n for n up to [`MAX_EXACT_TREE_N`], by dynamic programming
/// over trees (not over insertion histories).
pub fn exact_tree_dist(
    n: u32,
    p: &Params,
) -> Result<ExactDistribution<LabeledBinaryTree>, ExactError> {
    if n == 0 || n > MAX_EXACT_TREE_N {
        return Err(ExactError::SizeGuard {
            n: n as u64,
            max: MAX_EXACT_TREE_N as u64,
        });
    }
    let mut dist: BTreeMap<LabeledBinaryTree, Rational> = BTreeMap::new();
    dist.insert(LabeledBinaryTree::trivial(), Rational::one());
    for _ in 1..n {
        let mut next: BTreeMap<LabeledBinaryTree, Rational> = BTreeMap::new();
        for (t, prob) in &dist {
            for (edge, q) in edge_select_probs(t, p) {
                let grown = grow_at(t, &edge);
                *next.entry(grown).or_insert_with(Rational::zero) += prob.clone() * q;
            }
        }
        dist = next;
    }
    Ok(ExactDistribution::from_map(dist))
}

/// All labeled trees on [n] (uniform support, not a law), n guarded.
pub fn enumerate_trees(n: u32) -> Result<Vec<LabeledBinaryTree>, ExactError> {
    if n == 0 || n > MAX_EXACT_TREE_N {
        return Err(ExactError::SizeGuard {
            n: n as u64,
            max: MAX_EXACT_TREE_N as u64,
        });
    }
    let mut trees = vec![LabeledBinaryTree::trivial()];
    for _ in 1..n {
        let mut next = Vec::new();
        for t in &trees {
            for b in t.blocks() {
                next.push(grow_at(t, b));
            }
        }
        trees = next;
    }
    Ok(trees)
}

/// First-split sizes {m, n−m} of a tree, reported as m ≤ n−m.
pub fn first_split_size(t: &LabeledBinaryTree) -> u64 {
    assert!(t.n() >= 2);
    let idx = t.index();
    let (a, _) = idx.children[idx.root].expect("root splits");
    let m = idx.blocks[a].len() as u64;
    m.min(t.n() as u64 - m)
}

/// Splitting rule q°(m, n−m) of the delabeled Markov branching tree.
pub fn splitting_rule_q_circ(m: u64, n: u64, p: &Params) -> Rational {
    assert!(m >= 1 && 2 * m <= n, "need 1 <= m <= n/2");
    if 2 * m == n {
        decrement_q(n - 1, m, p)
    } else {
        decrement_q(n - 1, m, p) + decrement_q(n - 1, n - m, p)
    }
}

/// q^bias(x, y) = q(x+y−1, x): the first split of [x+y] is into sizes x and
/// y with the piece of size x not containing label 1.
pub fn q_bias(x: u64, y: u64, p: &Params) -> Rational {
    assert!(x >= 1 && y >= 1);
    decrement_q(x + y - 1, x, p)
}

/// Symmetrized splitting rule.
pub fn q_sym(x: u64, y: u64, p: &Params) -> Rational {
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    half.clone() * q_bias(x, y, p) + half * q_bias(y, x, p)
}

/// The weak-sampling-consistency defect of the symmetrized splitting rule;
/// identically zero exactly when uniform leaf deletion preserves the law.
pub fn d_sym(x: u64, y: u64, p: &Params) -> Rational {
    let npl = Rational::from_integer(BigInt::from(x + y + 1));
    let keep = Rational::one() - (q_sym(1, x + y, p) + q_sym(x + y, 1, p)) / npl.clone();
    q_sym(x, y, p) * keep
        - q_sym(x + 1, y, p) * Rational::from_integer(BigInt::from(x + 1)) / npl.clone()
        - q_sym(x, y + 1, p) * Rational::from_integer(BigInt::from(y + 1)) / npl
}

/// The closed form of d_sym(1, 3):
/// (1−α)(1−α−θ)(2−α−θ)(3−α+θ)(α+θ) / (10 (1+θ)² (2+θ)² (3+θ)).
pub fn d_sym_13_closed_form(p: &Params) -> Rational {
    let one = Rational::one();
    let two = Rational::from_integer(BigInt::from(2));
    let three = Rational::from_integer(BigInt::from(3));
    let a = p.alpha();
    let t = p.theta();
    let num = (one.clone() - a)
        * (one.clone() - a - t)
        * (two.clone() - a - t)
        * (three.clone() - a + t)
        * (a + t);
    let den = Rational::from_integer(BigInt::from(10))
        * (one.clone() + t)
        * (one.clone() + t)
        * (two.clone() + t)
        * (two + t)
        * (three + t);
    num / den
}

/// Verify that the symmetrized splitting rules under θ = 1 − α and
/// θ = 2 − α agree for every split of every n ≤ n_max.
pub fn check_lemma12(n_max: u64, alpha: &Rational) -> Result<(), (u64, u64)> {
    let one = Rational::one();
    let two = Rational::from_integer(BigInt::from(2));
    let p_ford = Params::new(alpha.clone(), one - alpha).expect("θ=1−α valid");
    let p_x = Params::new(alpha.clone(), two - alpha).expect("θ=2−α valid");
    for n in 2..=n_max {
        for x in 1..n {
            let y = n - x;
            if q_sym(x, y, &p_ford) != q_sym(x, y, &p_x) {
                return Err((x, y));
            }
        }
    }
    Ok(())
}

/// Outcome of the weak-sampling-consistency comparison at one n.
#[derive(Debug, Clone)]
pub struct WeakConsistencyOutcome {
    pub pass: bool,
    /// Exact total-variation gap between the laws of T°_n and of the tree
    /// obtained from T°_{n+1} by deleting a uniform leaf.
    pub tv_gap: Rational,
}

pub fn weak_consistency_check(n: u32, p: &Params) -> Result<WeakConsistencyOutcome, ExactError> {
    if n < 2 || n + 1 > MAX_EXACT_TREE_N {
        return Err(ExactError::SizeGuard {
            n: n as u64,
            max: MAX_EXACT_TREE_N as u64 - 1,
        });
    }
    let shapes_n = exact_tree_dist(n, p)?.map_keys(|t| t.delabel());
    let dist_np1 = exact_tree_dist(n + 1, p)?;
    let uniform = Rational::new(BigInt::one(), BigInt::from(n + 1));
    let mut deleted: BTreeMap<TreeShape, Rational> = BTreeMap::new();
    for (t, prob) in dist_np1.support() {
        for drop in 1..=(n + 1) {
            let keep: Vec<u32> = (1..=(n + 1)).filter(|&x| x != drop).collect();
            let reduced = t.reduce(&Block::new(keep)).expect("valid leaf subset");
            *deleted
                .entry(reduced.delabel())
                .or_insert_with(Rational::zero) += prob.clone() * uniform.clone();
        }
    }
    let deleted = ExactDistribution::from_map(deleted);
    let tv_gap = shapes_n.tv_distance(&deleted);
    Ok(WeakConsistencyOutcome {
        pass: tv_gap.is_zero(),
        tv_gap,
    })
}

/// Exact exchangeability check: is the law of T_n invariant under all
/// relabelings? Invariance under adjacent transpositions suffices.
pub fn exchangeability_check(n: u32, p: &Params) -> Result<bool, ExactError> {
    let dist = exact_tree_dist(n, p)?;
    for swap in 1..n {
        let perm: Vec<u32> = (1..=n)
            .map(|x| {
                if x == swap {
                    swap + 1
                } else if x == swap + 1 {
                    swap
                } else {
                    x
                }
            })
            .collect();
        for (t, prob) in dist.support() {
            if dist.prob(&t.relabel(&perm)) != *prob {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact joint law of (spinal composition, 1-based block of customer 1)
/// for the ordered restaurant with n customers, by dynamic programming over
/// seating paths.
pub fn exact_crp_joint_law(
    n: u64,
    p: &Params,
) -> Result<ExactDistribution<(Composition, usize)>, ExactError> {
    if n == 0 || n > MAX_EXACT_CRP_N {
        return Err(ExactError::SizeGuard {
            n,
            max: MAX_EXACT_CRP_N,
        });
    }
    type State = (Vec<u64>, usize);
    let mut dist: BTreeMap<State, Rational> = BTreeMap::new();
    dist.insert((vec![1], 0), Rational::one());
    for m in 1..n {
        let denom = Rational::from_integer(BigInt::from(m)) + p.theta();
        let mut next: BTreeMap<State, Rational> = BTreeMap::new();
        for ((tables, c1), prob) in &dist {
            let k = tables.len();
            // Join an existing table.
            for j in 0..k {
                let w =
                    (Rational::from_integer(BigInt::from(tables[j])) - p.alpha()) / denom.clone();
                if w.is_zero() {
                    continue;
                }
                let mut t2 = tables.clone();
                t2[j] += 1;
                *next.entry((t2, *c1)).or_insert_with(Rational::zero) += prob.clone() * w;
            }
            // Open a new table at slot g (g = k is right-most).
            for g in 0..=k {
                let w = if g == k {
                    p.theta() / denom.clone()
                } else {
                    p.alpha() / denom.clone()
                };
                if w.is_zero() {
                    continue;
                }
                let mut t2 = tables.clone();
                t2.insert(g, 1);
                let c1_new = if g <= *c1 { *c1 + 1 } else { *c1 };
                *next.entry((t2, c1_new)).or_insert_with(Rational::zero) += prob.clone() * w;
            }
        }
        dist = next;
    }
    let mapped = dist
        .into_iter()
        .map(|((tables, c1), prob)| {
            (
                (Composition::new(tables).expect("positive parts"), c1 + 1),
                prob,
            )
        })
        .collect();
    Ok(ExactDistribution::from_map(mapped))
}

/// JSON-facing report for the exact check suite.
#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub params: ParamsRepr,
    pub check: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsRepr {
    pub alpha: String,
    pub theta: String,
}

impl ParamsRepr {
    pub fn of(p: &Params) -> Self {
        ParamsRepr {
            alpha: crate::params::rational_string(p.alpha()),
            theta: crate::params::rational_string(p.theta()),
        }
    }
}

/// The standard parameter grid for the exact suites: the product of
/// α ∈ {1/10, 1/3, 1/2, 2/3, 9/10} and θ ∈ {0, 1/2, 1, 3/2, 2}, plus the
/// θ = 1 − α and θ = 2 − α lines over the same α values.
pub fn parameter_grid() -> Vec<Params> {
    let alphas = [(1i64, 10i64), (1, 3), (1, 2), (2, 3), (9, 10)];
    let thetas = [(0i64, 1i64), (1, 2), (1, 1), (3, 2), (2, 1)];
    let mut out = Vec::new();
    for &(an, ad) in &alphas {
        for &(tn, td) in &thetas {
            out.push(Params::from_ints(an, ad, tn, td));
        }
        out.push(Params::from_ints(an, ad, ad - an, ad));
        out.push(Params::from_ints(an, ad, 2 * ad - an, ad));
    }
    out.sort_by_key(|p| {
        (
            crate::params::rational_string(p.alpha()),
            crate::params::rational_string(p.theta()),
        )
    });
    out.dedup();
    out
}
