//! Bead trees: finite weighted trees whose edges carry strings of beads,
//! grown by the bead-crushing chain.
//!
//! The chain starts from a single (α, θ)-string of beads. Each step selects
//! an edge with probability proportional to its bead mass, picks a bead on
//! it — (α, θ)-switching on leaf edges, (α, α)-switching (a mass-biased
//! pick) on inner edges — and replaces the bead by an independent
//! (α, θ)-string scaled in mass by the bead mass m and in length by m^α,
//! attached as the edge of the new leaf. The removed bead's position splits
//! the old edge in two.

use crate::crp::sample_num_tables;
use crate::growth::Grower;
use crate::limits::{
    local_time_moment, pick_bead, string_of_beads, BeadPick, LimitsError, StringOfBeads,
    SwitchingRule,
};
use crate::params::Params;
use crate::trees::{Block, EdgeLengthTree, LabeledBinaryTree};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BeadsError {
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error("bead pick kept overrunning the truncated string")]
    RetryBudgetExhausted,
}

const NIL: u32 = u32::MAX;
const MAX_PICK_RETRIES: u32 = 10_000;

#[derive(Debug, Clone)]
struct BeadNode {
    parent: u32,
    children: (u32, u32),
    min: u32,
    /// Leaf label (leaves only).
    label: u32,
    length: f64,
    beads: StringOfBeads,
    degenerate: bool,
}

impl BeadNode {
    fn is_leaf(&self) -> bool {
        self.children.0 == NIL
    }
}

/// A tree shape on [k] with per-edge lengths and strings of beads. Total
/// bead mass over all edges stays 1 through crushing.
#[derive(Debug, Clone)]
pub struct BeadTree {
    nodes: Vec<BeadNode>,
    top: u32,
    k: u32,
}

/// One step of the crushing chain.
#[derive(Debug, Clone)]
pub struct CrushEvent {
    /// Block of the selected edge, in the labels of the pre-step tree.
    pub block: Block,
    /// Position of the crushed bead within the selected edge.
    pub position: f64,
    pub mass: f64,
    /// Picks that overran the truncation and were redrawn.
    pub retries: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeadTreeJson {
    pub shape: LabeledBinaryTree,
    pub edges: Vec<BeadEdgeJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeadEdgeJson {
    pub block: Vec<u32>,
    pub length: f64,
    pub beads: Vec<(f64, f64)>,
    pub leftover: f64,
    pub degenerate: bool,
}

impl BeadTree {
    pub fn leaf_count(&self) -> u32 {
        self.k
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.beads.total_mass()).sum()
    }

    pub fn total_length(&self) -> f64 {
        self.nodes.iter().map(|n| n.length).sum()
    }

    fn block_of(&self, node: u32) -> Block {
        let mut labels = Vec::new();
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

    pub fn shape(&self) -> LabeledBinaryTree {
        let mut blocks = BTreeSet::new();
        for i in 0..self.nodes.len() {
            blocks.insert(self.block_of(i as u32));
        }
        LabeledBinaryTree::from_valid_blocks(blocks, self.k)
    }

    /// Bead mass per edge, keyed by the block below the edge.
    pub fn edge_mass_vector(&self) -> BTreeMap<Block, f64> {
        (0..self.nodes.len() as u32)
            .map(|i| (self.block_of(i), self.nodes[i as usize].beads.total_mass()))
            .collect()
    }

    /// Per-edge data: (block, length, string, degenerate flag).
    pub fn edge_info(&self) -> Vec<(Block, f64, StringOfBeads, bool)> {
        (0..self.nodes.len() as u32)
            .map(|i| {
                let nd = &self.nodes[i as usize];
                (self.block_of(i), nd.length, nd.beads.clone(), nd.degenerate)
            })
            .collect()
    }

    /// The shape with edge lengths, for Newick export.
    pub fn skeleton(&self) -> EdgeLengthTree {
        EdgeLengthTree {
            shape: self.shape(),
            lengths: (0..self.nodes.len() as u32)
                .map(|i| (self.block_of(i), self.nodes[i as usize].length))
                .collect(),
        }
    }

    pub fn to_json(&self) -> BeadTreeJson {
        BeadTreeJson {
            shape: self.shape(),
            edges: (0..self.nodes.len() as u32)
                .map(|i| {
                    let nd = &self.nodes[i as usize];
                    BeadEdgeJson {
                        block: self.block_of(i).labels().to_vec(),
                        length: nd.length,
                        beads: nd.beads.atoms.clone(),
                        leftover: nd.beads.leftover,
                        degenerate: nd.degenerate,
                    }
                })
                .collect(),
        }
    }

    /// In-place crushing step; `crush_grow` is the pure wrapper.
    pub fn crush_step<R: Rng>(
        &mut self,
        p: &Params,
        n_budget: u64,
        rng: &mut R,
    ) -> Result<CrushEvent, BeadsError> {
        // Edge selection by bead mass. The rounding fallback must land on a
        // positive-mass edge (degenerate edges carry none).
        let total: f64 = self.total_mass();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut selected = None;
        let mut last_positive = self.top;
        for (i, nd) in self.nodes.iter().enumerate() {
            let mass = nd.beads.total_mass();
            if mass > 0.0 {
                last_positive = i as u32;
            }
            acc += mass;
            if u < acc {
                selected = Some(i as u32);
                break;
            }
        }
        let selected = selected.unwrap_or(last_positive);
        let is_leaf_edge = self.nodes[selected as usize].is_leaf();
        let block = self.block_of(selected);
        // Bead pick: (α, θ) on leaf edges, (α, α) on inner edges; redraw on
        // truncation overruns and surface the count.
        let pick_params = if is_leaf_edge {
            p.clone()
        } else {
            p.alpha_alpha()
        };
        let mut retries = 0u32;
        let atom_idx = loop {
            match pick_bead(
                &self.nodes[selected as usize].beads,
                &pick_params,
                SwitchingRule::AlphaTheta,
                rng,
            )? {
                BeadPick::Atom(j) => break j,
                BeadPick::BeyondTruncation => {
                    retries += 1;
                    if retries > MAX_PICK_RETRIES {
                        return Err(BeadsError::RetryBudgetExhausted);
                    }
                }
            }
        };
        let (position, mass) = self.nodes[selected as usize].beads.atoms[atom_idx];
        // Fresh string for the new leaf, scaled by the crushed mass.
        let alpha = p.alpha_f64();
        let fresh = string_of_beads(p, n_budget, rng)?.scaled(mass, mass.powf(alpha));
        let new_label = self.k + 1;
        let leaf = self.nodes.len() as u32;
        self.nodes.push(BeadNode {
            parent: NIL,
            children: (NIL, NIL),
            min: new_label,
            label: new_label,
            length: fresh.length,
            beads: fresh,
            degenerate: false,
        });
        // Split the selected edge at the bead position: the lower segment
        // becomes the new branch's edge, the upper stays with the subtree.
        let branch = self.nodes.len() as u32;
        let old = &self.nodes[selected as usize];
        let old_parent = old.parent;
        let old_len = old.length;
        let mut lower_atoms = Vec::new();
        let mut upper_atoms = Vec::new();
        for &(pos, m) in &old.beads.atoms {
            if pos < position {
                lower_atoms.push((pos, m));
            } else if pos > position {
                upper_atoms.push((pos - position, m));
            }
        }
        let upper_leftover = old.beads.leftover;
        let min = old.min;
        self.nodes.push(BeadNode {
            parent: old_parent,
            children: (selected, leaf),
            min,
            label: 0,
            length: position,
            beads: StringOfBeads {
                length: position,
                atoms: lower_atoms,
                leftover: 0.0,
            },
            degenerate: false,
        });
        {
            let upper_len = old_len - position;
            let nd = &mut self.nodes[selected as usize];
            nd.parent = branch;
            nd.length = upper_len;
            nd.beads = StringOfBeads {
                length: upper_len,
                atoms: upper_atoms,
                leftover: upper_leftover,
            };
            if upper_len <= 0.0 {
                // θ = 0 pick of the terminal bead at a leaf: the remaining
                // leaf edge has zero length and no more beads.
                nd.length = 0.0;
                nd.degenerate = true;
            }
        }
        self.nodes[leaf as usize].parent = branch;
        if old_parent == NIL {
            self.top = branch;
        } else {
            let pc = self.nodes[old_parent as usize].children;
            if pc.0 == selected {
                self.nodes[old_parent as usize].children.0 = branch;
            } else {
                self.nodes[old_parent as usize].children.1 = branch;
            }
        }
        self.k += 1;
        Ok(CrushEvent {
            block,
            position,
            mass,
            retries,
        })
    }
}

/// The one-edge bead tree: a single (α, θ)-string of beads for leaf 1.
pub fn sample_r1<R: Rng>(p: &Params, n_budget: u64, rng: &mut R) -> Result<BeadTree, BeadsError> {
    let s = string_of_beads(p, n_budget, rng)?;
    Ok(BeadTree {
        nodes: vec![BeadNode {
            parent: NIL,
            children: (NIL, NIL),
            min: 1,
            label: 1,
            length: s.length,
            beads: s,
            degenerate: false,
        }],
        top: 0,
        k: 1,
    })
}

/// One crushing transition, returning the grown tree and the event.
pub fn crush_grow<R: Rng>(
    bt: &BeadTree,
    p: &Params,
    n_budget: u64,
    rng: &mut R,
) -> Result<(BeadTree, CrushEvent), BeadsError> {
    let mut next = bt.clone();
    let event = next.crush_step(p, n_budget, rng)?;
    Ok((next, event))
}

/// Run the chain from the single string up to k leaves.
pub fn sample_rk<R: Rng>(
    k: u32,
    p: &Params,
    n_budget: u64,
    rng: &mut R,
) -> Result<BeadTree, BeadsError> {
    assert!(k >= 1);
    let mut bt = sample_r1(p, n_budget, rng)?;
    for _ in 1..k {
        bt.crush_step(p, n_budget, rng)?;
    }
    Ok(bt)
}

/// A reduced tree with rescaled edge lengths and a projected mass per edge.
#[derive(Debug, Clone)]
pub struct ReducedMassTree {
    pub tree: EdgeLengthTree,
    /// Projected leaf mass per edge, keyed like the edge lengths.
    pub masses: BTreeMap<Block, f64>,
}

/// Grow T_n, reduce to the first k leaves with lengths scaled by n^{−α},
/// and project the empirical leaf measure onto the reduced tree: every leaf
/// of T_n contributes 1/n to the closest reduced-tree point on its root
/// path.
pub fn reduced_scaled_from_growth<R: Rng>(
    n: u32,
    k: u32,
    p: &Params,
    rng: &mut R,
) -> ReducedMassTree {
    assert!(k >= 1 && k <= n);
    let g = crate::growth::grow_arena(n, p, rng);
    reduced_scaled_from_arena(&g, k, p.alpha_f64())
}

pub(crate) fn reduced_scaled_from_arena(g: &Grower, k: u32, alpha: f64) -> ReducedMassTree {
    let n = g.n();
    let nodes = &g.nodes;
    let nf = n as f64;
    // Spanned = subtree contains a label ≤ k, i.e. its min label is ≤ k.
    let spanned = |v: u32| nodes[v as usize].min <= k;
    let mut lengths: BTreeMap<Block, f64> = BTreeMap::new();
    let mut masses: BTreeMap<Block, f64> = BTreeMap::new();
    // Labels ≤ k below a spanned node, collected over the spanned part.
    fn content(g: &Grower, v: u32, k: u32, out: &mut Vec<u32>) {
        let nd = &g.nodes[v as usize];
        if nd.children.0 == u32::MAX {
            if nd.label <= k {
                out.push(nd.label);
            }
            return;
        }
        for c in [nd.children.0, nd.children.1] {
            if g.nodes[c as usize].min <= k {
                content(g, c, k, out);
            }
        }
    }
    // Walk each maximal contracted run of spanned vertices; `steps` counts
    // arena edges since the run began (= graph-distance edge length).
    struct Walk {
        node: u32,
        block: Block,
        steps: u32,
        mass: f64,
    }
    let mut stack = vec![Walk {
        node: g.top,
        block: Block::full(k),
        steps: 1,
        mass: 0.0,
    }];
    while let Some(mut w) = stack.pop() {
        let nd = &nodes[w.node as usize];
        if nd.children.0 == NIL {
            // Reduced leaf: its own 1/n plus anything projected en route.
            debug_assert!(nd.label <= k);
            masses.insert(w.block.clone(), w.mass + 1.0 / nf);
            lengths.insert(w.block, w.steps as f64);
            continue;
        }
        let (a, b) = (nd.children.0, nd.children.1);
        match (spanned(a), spanned(b)) {
            (true, true) => {
                // Reduced branch point: close the current edge here.
                masses.insert(w.block.clone(), w.mass);
                lengths.insert(w.block.clone(), w.steps as f64);
                for c in [a, b] {
                    let mut labels = Vec::new();
                    content(g, c, k, &mut labels);
                    stack.push(Walk {
                        node: c,
                        block: Block::new(labels),
                        steps: 1,
                        mass: 0.0,
                    });
                }
            }
            (true, false) | (false, true) => {
                // Contracted vertex inside the current reduced edge: the
                // unspanned side projects here.
                let (on, off) = if spanned(a) { (a, b) } else { (b, a) };
                w.mass += nodes[off as usize].size as f64 / nf;
                w.node = on;
                w.steps += 1;
                stack.push(w);
            }
            (false, false) => unreachable!("spanned node has a spanned child"),
        }
    }
    let shape_blocks: BTreeSet<Block> = lengths.keys().cloned().collect();
    let shape = LabeledBinaryTree::from_valid_blocks(shape_blocks, k);
    let scale = nf.powf(-alpha);
    ReducedMassTree {
        tree: EdgeLengthTree {
            shape,
            lengths: lengths.into_iter().map(|(b, l)| (b, l * scale)).collect(),
        },
        masses,
    }
}

/// Closed form E d_2(ρ, J_1)^s = Γ(s+1) Γ(2−α) / Γ(2 + sα − α) in the
/// θ = 1 − α regime.
pub fn d2_closed_form(s: f64, alpha: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (ln_gamma(s + 1.0) + ln_gamma(2.0 - alpha) - ln_gamma(2.0 + s * alpha - alpha)).exp()
}

/// Root-to-branch-point distance via independent α-diversities:
/// d = H^α S with H ~ beta(α, 2−2α) and S the (α, α) local time.
pub fn d2_sample_via_diversities<R: Rng>(alpha: f64, budget: u64, rng: &mut R) -> f64 {
    let h = Beta::new(alpha, 2.0 - 2.0 * alpha)
        .expect("positive parameters")
        .sample(rng);
    let p_aa = Params::parse(&alpha.to_string(), &alpha.to_string()).expect("valid");
    let s = sample_num_tables(budget, &p_aa, rng) as f64 / (budget as f64).powf(alpha);
    h.powf(alpha) * s
}

/// Root-to-branch-point distance via the total length split:
/// d = D λ with D ~ beta(1, 2/α − 2) and λ the (α, 2−α) local time.
pub fn d2_sample_via_total_length<R: Rng>(alpha: f64, budget: u64, rng: &mut R) -> f64 {
    let d = Beta::new(1.0, 2.0 / alpha - 2.0)
        .expect("positive parameters")
        .sample(rng);
    let p_x = Params::parse(&alpha.to_string(), &(2.0 - alpha).to_string()).expect("valid");
    let lambda = sample_num_tables(budget, &p_x, rng) as f64 / (budget as f64).powf(alpha);
    d * lambda
}

/// Monte Carlo check of the s-th moment of the root-to-branch-point
/// distance of the two-leaf bead tree against the closed form (θ = 1 − α).
#[derive(Debug, Clone, Serialize)]
pub struct D2MomentCheck {
    pub mc_estimate: f64,
    pub closed_form: f64,
    pub z_score: f64,
}

pub fn moment_check_d2<R: Rng>(
    s: f64,
    alpha: f64,
    n_replicates: u64,
    n_budget: u64,
    rng: &mut R,
) -> Result<D2MomentCheck, BeadsError> {
    let p = Params::parse(&alpha.to_string(), &(1.0 - alpha).to_string()).expect("valid");
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..n_replicates {
        let bt = sample_rk(2, &p, n_budget, rng)?;
        let trunk = bt.nodes[bt.top as usize].length;
        let v = trunk.powf(s);
        acc += v;
        acc2 += v * v;
    }
    let nf = n_replicates as f64;
    let mean = acc / nf;
    let var = (acc2 / nf - mean * mean).max(0.0);
    let closed = d2_closed_form(s, alpha);
    let z = (mean - closed) / (var / nf).sqrt().max(1e-300);
    Ok(D2MomentCheck {
        mc_estimate: mean,
        closed_form: closed,
        z_score: z,
    })
}

/// E[length / mass^α] for the trunk should match the (α, α) local-time
/// mean; exposed for the string-law diagnostics.
pub fn expected_trunk_ratio(p: &Params) -> f64 {
    local_time_moment(1.0, &p.alpha_alpha())
}
