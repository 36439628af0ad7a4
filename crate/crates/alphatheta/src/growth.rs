//! Sequential tree growth samplers.
//!
//! The (α, θ) rule picks the insertion edge by recursive descent: at each
//! branch point the root-side edge gets weight α, the subtree not containing
//! the smallest label (size m) gets m − α, and the subtree containing it
//! (size n − m) gets n − m − 1 + θ. Descent continues inside a selected
//! multi-leaf subtree until an edge or a single-leaf subtree is hit.
//!
//! Two more samplers live here: the leaf/internal edge-weight rule (weight
//! 1 − α per leaf edge, α per internal edge), whose selection law coincides
//! with the (α, 1 − α) rule, and the α = 0 walker model, which climbs the
//! complete binary tree flipping a beta(1, θ)-distributed coin at each
//! visited vertex of a fixed random environment.

use crate::params::Params;
use crate::trees::{Block, LabeledBinaryTree};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use std::collections::BTreeSet;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub parent: u32,
    /// Children (left, right) in insertion order; NIL for leaves.
    pub children: (u32, u32),
    pub size: u32,
    pub min: u32,
    /// Leaf label; meaningful only for leaves.
    pub label: u32,
    /// Walker-model environment mark at this vertex, sampled on first use.
    mark: Option<f64>,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.children.0 == NIL
    }
}

/// Mutable growth state: a leaf-labeled binary tree in arena form, grown one
/// leaf per step. Conversion to the block-set representation is on demand.
#[derive(Debug, Clone)]
pub struct Grower {
    pub(crate) nodes: Vec<Node>,
    pub(crate) top: u32,
    n: u32,
}

impl Grower {
    /// The single-leaf tree T_1.
    pub fn new() -> Self {
        Grower {
            nodes: vec![Node {
                parent: NIL,
                children: (NIL, NIL),
                size: 1,
                min: 1,
                label: 1,
                mark: None,
            }],
            top: 0,
            n: 1,
        }
    }

    pub fn from_tree(tree: &LabeledBinaryTree) -> Self {
        let idx = tree.index();
        let mut nodes = Vec::with_capacity(idx.blocks.len());
        for (i, b) in idx.blocks.iter().enumerate() {
            nodes.push(Node {
                parent: idx.parent[i].map_or(NIL, |p| p as u32),
                children: idx.children[i].map_or((NIL, NIL), |(a, c)| (a as u32, c as u32)),
                size: b.len() as u32,
                min: b.min_label(),
                label: if b.len() == 1 { b.min_label() } else { 0 },
                mark: None,
            });
        }
        Grower {
            nodes,
            top: idx.root as u32,
            n: tree.n(),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Number of edges from the root vertex to leaf 1.
    pub fn leaf1_depth(&self) -> u32 {
        let mut node = (0..self.nodes.len())
            .find(|&i| self.nodes[i].is_leaf() && self.nodes[i].label == 1)
            .expect("leaf 1 exists") as u32;
        let mut d = 1;
        while self.nodes[node as usize].parent != NIL {
            node = self.nodes[node as usize].parent;
            d += 1;
        }
        d
    }

    fn split(&self, node: u32) -> (u32, u32) {
        let v = &self.nodes[node as usize];
        let (a, b) = v.children;
        if self.nodes[a as usize].min == v.min {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Recursive-descent edge selection of the (α, θ) rule. Returns the
    /// arena node whose parent edge was selected. One uniform per level.
    pub(crate) fn select_edge_node<R: Rng>(&self, p: &Params, rng: &mut R) -> u32 {
        if self.n == 1 {
            return self.top;
        }
        let alpha = p.alpha_f64();
        let theta = p.theta_f64();
        let mut node = self.top;
        loop {
            let (with_min, other) = self.split(node);
            let s = self.nodes[node as usize].size as f64;
            let m = self.nodes[other as usize].size as f64;
            let u: f64 = rng.random::<f64>() * (s - 1.0 + theta);
            let chosen = if u < alpha {
                return node;
            } else if u < alpha + (m - alpha) {
                other
            } else {
                with_min
            };
            if self.nodes[chosen as usize].is_leaf() {
                return chosen;
            }
            node = chosen;
        }
    }

    /// Insert leaf n+1 on the edge above `node`, returning the new leaf's
    /// arena index.
    pub(crate) fn insert_at(&mut self, node: u32) -> u32 {
        let label = self.n + 1;
        let leaf = self.nodes.len() as u32;
        self.nodes.push(Node {
            parent: NIL,
            children: (NIL, NIL),
            size: 1,
            min: label,
            label,
            mark: None,
        });
        let branch = self.nodes.len() as u32;
        let old_parent = self.nodes[node as usize].parent;
        self.nodes.push(Node {
            parent: old_parent,
            children: (node, leaf),
            size: self.nodes[node as usize].size + 1,
            min: self.nodes[node as usize].min,
            label: 0,
            mark: None,
        });
        self.nodes[node as usize].parent = branch;
        self.nodes[leaf as usize].parent = branch;
        if old_parent == NIL {
            self.top = branch;
        } else {
            let pc = self.nodes[old_parent as usize].children;
            if pc.0 == node {
                self.nodes[old_parent as usize].children.0 = branch;
            } else {
                self.nodes[old_parent as usize].children.1 = branch;
            }
            let mut up = old_parent;
            loop {
                self.nodes[up as usize].size += 1;
                up = self.nodes[up as usize].parent;
                if up == NIL {
                    break;
                }
            }
        }
        self.n += 1;
        leaf
    }

    /// One (α, θ) growth step.
    pub fn step<R: Rng>(&mut self, p: &Params, rng: &mut R) {
        let edge = self.select_edge_node(p, rng);
        self.insert_at(edge);
    }

    /// One walker-model step in the fixed beta(1, θ) environment. The coin
    /// at each vertex sends the walker to the child not containing the
    /// smallest label with probability W, so a θ = 0 environment (W ≡ 1)
    /// never descends towards leaf 1.
    pub fn walker_step<R: Rng>(&mut self, theta: f64, rng: &mut R) {
        let beta = if theta > 0.0 {
            Some(Beta::new(1.0, theta).expect("valid beta"))
        } else {
            None
        };
        let mut node = self.top;
        while !self.nodes[node as usize].is_leaf() {
            let w = match self.nodes[node as usize].mark {
                Some(w) => w,
                None => {
                    let w = match &beta {
                        Some(b) => b.sample(rng),
                        None => 1.0,
                    };
                    self.nodes[node as usize].mark = Some(w);
                    w
                }
            };
            let (with_min, other) = self.split(node);
            node = if rng.random::<f64>() < w {
                other
            } else {
                with_min
            };
        }
        self.insert_at(node);
    }

    pub(crate) fn block_of(&self, node: u32) -> Block {
        let mut labels = Vec::with_capacity(self.nodes[node as usize].size as usize);
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            let nd = &self.nodes[v as usize];
            if nd.is_leaf() {
                labels.push(nd.label);
            } else {
                stack.push(nd.children.0);
                stack.push(nd.children.1);
            }
        }
        Block::new(labels)
    }

    pub fn to_tree(&self) -> LabeledBinaryTree {
        let mut blocks = BTreeSet::new();
        // Collect label sets bottom-up to avoid re-walking subtrees.
        let mut sets: Vec<Option<Vec<u32>>> = vec![None; self.nodes.len()];
        let mut order: Vec<u32> = (0..self.nodes.len() as u32).collect();
        order.sort_by_key(|&i| self.nodes[i as usize].size);
        for i in order {
            let nd = &self.nodes[i as usize];
            let labels = if nd.is_leaf() {
                vec![nd.label]
            } else {
                let a = sets[nd.children.0 as usize].as_ref().expect("child first");
                let b = sets[nd.children.1 as usize].as_ref().expect("child first");
                let mut merged = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    if a[i] < b[j] {
                        merged.push(a[i]);
                        i += 1;
                    } else {
                        merged.push(b[j]);
                        j += 1;
                    }
                }
                merged.extend_from_slice(&a[i..]);
                merged.extend_from_slice(&b[j..]);
                merged
            };
            blocks.insert(Block::new(labels.clone()));
            sets[i as usize] = Some(labels);
        }
        LabeledBinaryTree::from_valid_blocks(blocks, self.n)
    }
}

impl Default for Grower {
    fn default() -> Self {
        Grower::new()
    }
}

/// Select an edge of `t` by the (α, θ) rule; returns the block whose parent
/// edge was selected. For n = 1 the unique edge is returned without
/// consuming randomness.
pub fn select_edge<R: Rng>(t: &LabeledBinaryTree, p: &Params, rng: &mut R) -> Block {
    let g = Grower::from_tree(t);
    let node = g.select_edge_node(p, rng);
    g.block_of(node)
}

/// Insert leaf n+1 at an edge selected by the (α, θ) rule.
pub fn grow_step<R: Rng>(t: &LabeledBinaryTree, p: &Params, rng: &mut R) -> LabeledBinaryTree {
    let mut g = Grower::from_tree(t);
    g.step(p, rng);
    g.to_tree()
}

/// Grow T_n from T_1 by n − 1 applications of the (α, θ) step.
pub fn grow<R: Rng>(n: u32, p: &Params, rng: &mut R) -> LabeledBinaryTree {
    grow_arena(n, p, rng).to_tree()
}

/// As [`grow`] but returning the arena form, for callers that only need
/// summaries of the grown tree.
pub fn grow_arena<R: Rng>(n: u32, p: &Params, rng: &mut R) -> Grower {
    assert!(n >= 1);
    let mut g = Grower::new();
    for _ in 1..n {
        g.step(p, rng);
    }
    g
}

/// Select an edge with weight 1 − α per leaf edge and α per internal edge
/// (the root edge counts as internal). Coincides in law with
/// [`select_edge`] at θ = 1 − α.
pub fn ford_select_edge<R: Rng>(t: &LabeledBinaryTree, alpha: f64, rng: &mut R) -> Block {
    assert!((0.0..=1.0).contains(&alpha));
    let n = t.n() as f64;
    if t.n() == 1 {
        return Block::singleton(1);
    }
    let total = n - alpha;
    let u = rng.random::<f64>() * total;
    if u < n * (1.0 - alpha) {
        let leaf = (u / (1.0 - alpha)) as u32;
        return Block::singleton(leaf.min(t.n() - 1) + 1);
    }
    let mut rest = u - n * (1.0 - alpha);
    let mut last = None;
    for b in t.blocks().iter().filter(|b| b.len() >= 2) {
        last = Some(b);
        if rest < alpha {
            return b.clone();
        }
        rest -= alpha;
    }
    last.expect("internal edge exists for n >= 2").clone()
}

/// Grow T_n under the α = 0 walker model with a fresh beta(1, θ)
/// environment. The environment is sampled lazily and persists over the
/// whole growth run.
pub fn walker_grow<R: Rng>(n: u32, theta: f64, rng: &mut R) -> LabeledBinaryTree {
    walker_grow_arena(n, theta, rng).to_tree()
}

pub fn walker_grow_arena<R: Rng>(n: u32, theta: f64, rng: &mut R) -> Grower {
    assert!(n >= 1);
    assert!(theta >= 0.0);
    let mut g = Grower::new();
    for _ in 1..n {
        g.walker_step(theta, rng);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngFactory;
    use std::collections::BTreeMap;

    #[test]
    fn grow_trivial_cases() {
        let p = Params::from_ints(1, 2, 1, 2);
        let mut rng = RngFactory::new(7).stream(0);
        assert_eq!(grow(1, &p, &mut rng), LabeledBinaryTree::trivial());
        let t2 = grow(2, &p, &mut rng);
        assert_eq!(t2.n(), 2);
        assert_eq!(t2.blocks().len(), 3);
    }

    #[test]
    fn grown_trees_validate_and_have_n_leaves() {
        let p = Params::from_ints(1, 3, 3, 2);
        let f = RngFactory::new(11);
        for rep in 0..20 {
            let mut rng = f.stream(rep);
            let t = grow(12, &p, &mut rng);
            assert_eq!(t.n(), 12);
            // Block set validates from scratch.
            assert!(crate::trees::validate(t.blocks().clone(), 12).is_ok());
            assert_eq!(t.spinal_composition().total(), 11);
        }
    }

    #[test]
    fn grow_equals_iterated_grow_step() {
        let p = Params::from_ints(2, 3, 1, 1);
        let f = RngFactory::new(5);
        let direct = grow(7, &p, &mut f.stream(9));
        let mut rng = f.stream(9);
        let mut t = LabeledBinaryTree::trivial();
        for _ in 1..7 {
            t = grow_step(&t, &p, &mut rng);
        }
        assert_eq!(direct, t);
    }

    #[test]
    fn determinism_same_seed_same_tree() {
        let p = Params::from_ints(1, 2, 2, 1);
        let f = RngFactory::new(123);
        let a = grow(40, &p, &mut f.stream(1));
        let b = grow(40, &p, &mut f.stream(1));
        assert_eq!(a, b);
    }

    #[test]
    fn t2_edge_selection_frequencies() {
        // P(root) = α/(1+θ), P(leaf 2) = (1−α)/(1+θ), P(leaf 1) = θ/(1+θ).
        let p = Params::from_ints(1, 2, 1, 1);
        let t2 = {
            let mut g = Grower::new();
            g.insert_at(0);
            g.to_tree()
        };
        let mut rng = RngFactory::new(99).stream(0);
        let reps = 200_000;
        let mut counts: BTreeMap<Block, u64> = BTreeMap::new();
        for _ in 0..reps {
            *counts.entry(select_edge(&t2, &p, &mut rng)).or_insert(0) += 1;
        }
        let freq = |b: &Block| counts[b] as f64 / reps as f64;
        let root = Block::new(vec![1, 2]);
        assert!((freq(&root) - 0.25).abs() < 0.005);
        assert!((freq(&Block::singleton(2)) - 0.25).abs() < 0.005);
        assert!((freq(&Block::singleton(1)) - 0.5).abs() < 0.005);
    }

    #[test]
    fn alpha_one_grows_combs() {
        let p = Params::from_ints(1, 1, 1, 1);
        let f = RngFactory::new(2);
        for rep in 0..10 {
            let t = grow(8, &p, &mut f.stream(rep));
            // Comb: every internal block has a singleton child, i.e. the
            // delabeled tree is the caterpillar.
            let idx_blocks: Vec<&Block> = t.blocks().iter().filter(|b| b.len() >= 2).collect();
            for b in idx_blocks {
                let children: Vec<&Block> = t
                    .blocks()
                    .iter()
                    .filter(|c| {
                        c.len() < b.len()
                            && c.is_subset_of(b)
                            && !t.blocks().iter().any(|m| {
                                m.len() > c.len()
                                    && m.len() < b.len()
                                    && c.is_subset_of(m)
                                    && m.is_subset_of(b)
                            })
                    })
                    .collect();
                assert!(
                    children.iter().any(|c| c.len() == 1),
                    "non-comb split in {t}"
                );
            }
        }
    }

    #[test]
    fn ford_t2_frequencies() {
        // Weights: leaf edges 1−α each, root edge α; total 2−α.
        let alpha = 0.5;
        let t2 = {
            let mut g = Grower::new();
            g.insert_at(0);
            g.to_tree()
        };
        let mut rng = RngFactory::new(17).stream(0);
        let reps = 150_000;
        let mut root_hits = 0u64;
        for _ in 0..reps {
            if ford_select_edge(&t2, alpha, &mut rng).len() == 2 {
                root_hits += 1;
            }
        }
        let expect = alpha / (2.0 - alpha);
        assert!((root_hits as f64 / reps as f64 - expect).abs() < 0.005);
    }

    #[test]
    fn walker_theta_zero_is_comb_with_leaf1_shallow() {
        let mut rng = RngFactory::new(3).stream(0);
        let t = walker_grow(10, 0.0, &mut rng);
        // W ≡ 1 never descends towards leaf 1, so leaf 1 stays at depth 2.
        assert_eq!(t.leaf1_depth(), 2);
    }

    #[test]
    fn leaf1_depth_process_has_crp_table_count_law() {
        // The depth of leaf 1 minus one evolves like the table count of the
        // restaurant on n−1 customers: it increments at the T_m → T_{m+1}
        // step with probability (Kα + θ)/(m − 1 + θ). Joint chi-square of
        // the increment path up to n = 8.
        let p = Params::from_ints(1, 3, 1, 1);
        let (alpha, theta) = (p.alpha_f64(), p.theta_f64());
        let steps = 6; // transitions T_2 → T_8
        let exact_path_prob = |mask: u32| -> f64 {
            let mut k = 1.0;
            let mut prob = 1.0;
            for s in 0..steps {
                let m = (s + 2) as f64; // current tree size
                let inc = (k * alpha + theta) / (m - 1.0 + theta);
                if mask >> s & 1 == 1 {
                    prob *= inc;
                    k += 1.0;
                } else {
                    prob *= 1.0 - inc;
                }
            }
            prob
        };
        let probs: Vec<f64> = (0..1u32 << steps).map(exact_path_prob).collect();
        let mut counts = vec![0u64; 1 << steps];
        let f = RngFactory::new(41);
        let reps = 100_000u64;
        for rep in 0..reps {
            let mut rng = f.stream(rep);
            let mut g = Grower::new();
            g.step(&p, &mut rng); // T_2
            let mut depth = g.leaf1_depth();
            let mut mask = 0u32;
            for s in 0..steps {
                g.step(&p, &mut rng);
                let next = g.leaf1_depth();
                if next > depth {
                    mask |= 1 << s;
                }
                depth = next;
            }
            counts[mask as usize] += 1;
        }
        let report = crate::stats::chi_square_gof(&counts, &probs, 1e-3, 41, reps).unwrap();
        assert!(report.pass, "depth path law mismatch: {report:?}");
    }

    #[test]
    fn walker_height_scales_like_theta_log_n() {
        let theta = 2.0;
        let n = 10_000u32;
        let f = RngFactory::new(31);
        let reps = 300;
        let mut acc = 0.0;
        for rep in 0..reps {
            let mut rng = f.stream(rep);
            let g = walker_grow_arena(n, theta, &mut rng);
            acc += (g.leaf1_depth() - 1) as f64 / (n as f64).ln();
        }
        let mean = acc / reps as f64;
        assert!(
            (mean - theta).abs() / theta < 0.10,
            "walker height proxy {mean} too far from {theta}"
        );
    }
}
