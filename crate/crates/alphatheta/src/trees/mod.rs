//! Rooted binary trees with leaves labeled by [n], represented as the
//! collection of label blocks of their vertices.
//!
//! Every vertex of the tree is identified with the set of leaf labels in the
//! subtree above it, so a tree is a laminar family of subsets of [n]: the
//! root branch point carries [n], each leaf i carries {i}, and every block
//! with two or more labels splits into exactly two sub-blocks. The edge
//! "above" a vertex connects it to its parent; the edge above [n] is the
//! root edge.

mod newick;

pub use newick::{parse_newick, serialize_newick, serialize_newick_with_lengths, NewickError};

use crate::composition::Composition;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("leaf count must be positive")]
    EmptyTree,
    #[error("block {0:?} contains labels outside [n]")]
    LabelOutOfRange(Vec<u32>),
    #[error("block set must contain the root block [n]")]
    MissingRoot,
    #[error("missing singleton block for leaf {0}")]
    MissingSingleton(u32),
    #[error("expected {expected} blocks for a binary tree on [{n}], found {found}")]
    WrongBlockCount {
        n: u32,
        expected: usize,
        found: usize,
    },
    #[error("blocks {0:?} and {1:?} overlap without nesting")]
    NotLaminar(Vec<u32>, Vec<u32>),
    #[error("block {0:?} does not split into exactly two sub-blocks")]
    NotBinary(Vec<u32>),
    #[error("children of block {0:?} do not partition it")]
    ChildrenDoNotPartition(Vec<u32>),
    #[error("label set {0:?} is not a subset of [n]")]
    NotASubset(Vec<u32>),
    #[error("empty label subset")]
    EmptySubset,
    #[error("reduction size {k} exceeds leaf count {n}")]
    SubsetTooLarge { k: u32, n: u32 },
}

/// A non-empty set of leaf labels, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block(Vec<u32>);

impl Block {
    pub fn new(mut labels: Vec<u32>) -> Self {
        labels.sort_unstable();
        labels.dedup();
        Block(labels)
    }

    pub fn singleton(label: u32) -> Self {
        Block(vec![label])
    }

    pub fn full(n: u32) -> Self {
        Block((1..=n).collect())
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_label(&self) -> u32 {
        self.0[0]
    }

    pub fn contains(&self, label: u32) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn is_subset_of(&self, other: &Block) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for x in &self.0 {
            for y in it.by_ref() {
                if y == x {
                    continue 'outer;
                }
                if y > x {
                    return false;
                }
            }
            return false;
        }
        true
    }

    /// Sorted union, used when inserting a new leaf into ancestor blocks.
    pub fn with_label(&self, label: u32) -> Block {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        let pos = self.0.partition_point(|&x| x < label);
        v.extend_from_slice(&self.0[..pos]);
        v.push(label);
        v.extend_from_slice(&self.0[pos..]);
        Block(v)
    }

    pub fn intersect(&self, other: &Block) -> Vec<u32> {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}}")
    }
}

/// A rooted binary tree on leaf set [n], as a set of label blocks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabeledBinaryTree {
    n: u32,
    blocks: BTreeSet<Block>,
}

/// Serialized form: `{"n": ..., "blocks": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
struct TreeJson {
    n: u32,
    blocks: Vec<Vec<u32>>,
}

impl Serialize for LabeledBinaryTree {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        TreeJson {
            n: self.n,
            blocks: self.blocks.iter().map(|b| b.labels().to_vec()).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LabeledBinaryTree {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = TreeJson::deserialize(de)?;
        validate(raw.blocks.into_iter().map(Block::new).collect(), raw.n)
            .map_err(serde::de::Error::custom)
    }
}

/// Derived tree structure: parents, children and depths per block.
/// Rebuilt on demand; the block set is the source of truth.
pub(crate) struct TreeIndex {
    pub blocks: Vec<Block>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Option<(usize, usize)>>,
    /// Number of edges from the root vertex (the block [n] has depth 1).
    pub depth: Vec<u32>,
    pub root: usize,
    /// Node index of each singleton {i}, at position i-1.
    pub leaf_node: Vec<usize>,
}

impl TreeIndex {
    /// Child of `node` containing the smallest label of `node`, and the
    /// other child. Only valid for internal nodes.
    pub fn split(&self, node: usize) -> (usize, usize) {
        let (a, b) = self.children[node].expect("internal node");
        if self.blocks[a].min_label() == self.blocks[node].min_label() {
            (a, b)
        } else {
            (b, a)
        }
    }
}

fn build_index(blocks: Vec<Block>, n: u32) -> Result<TreeIndex, TreeError> {
    let expected = if n == 1 { 1 } else { 2 * n as usize - 1 };
    if blocks.len() != expected {
        return Err(TreeError::WrongBlockCount {
            n,
            expected,
            found: blocks.len(),
        });
    }
    for b in &blocks {
        if b.is_empty() || b.labels().last().copied().unwrap_or(0) > n || b.min_label() == 0 {
            return Err(TreeError::LabelOutOfRange(b.labels().to_vec()));
        }
    }
    // Locate root and singletons.
    let mut root = None;
    let mut leaf_node = vec![usize::MAX; n as usize];
    for (i, b) in blocks.iter().enumerate() {
        if b.len() == n as usize {
            root = Some(i);
        }
        if b.len() == 1 {
            leaf_node[b.min_label() as usize - 1] = i;
        }
    }
    let root = root.ok_or(TreeError::MissingRoot)?;
    for (label0, &node) in leaf_node.iter().enumerate() {
        if node == usize::MAX {
            return Err(TreeError::MissingSingleton(label0 as u32 + 1));
        }
    }
    // For each label, the chain of blocks containing it, sorted by size.
    // In a laminar family these are totally ordered; ties in size mean two
    // distinct same-size blocks share a label, which cannot nest.
    let mut chains: Vec<Vec<usize>> = vec![Vec::new(); n as usize];
    for (i, b) in blocks.iter().enumerate() {
        for &x in b.labels() {
            chains[x as usize - 1].push(i);
        }
    }
    let mut parent = vec![None; blocks.len()];
    for chain in &mut chains {
        chain.sort_by_key(|&i| blocks[i].len());
        for w in chain.windows(2) {
            if blocks[w[0]].len() == blocks[w[1]].len() {
                return Err(TreeError::NotLaminar(
                    blocks[w[0]].labels().to_vec(),
                    blocks[w[1]].labels().to_vec(),
                ));
            }
        }
    }
    for (i, b) in blocks.iter().enumerate() {
        if i == root {
            continue;
        }
        let chain = &chains[b.min_label() as usize - 1];
        let pos = chain
            .iter()
            .position(|&c| c == i)
            .expect("block in own chain");
        if pos + 1 >= chain.len() {
            return Err(TreeError::NotLaminar(b.labels().to_vec(), vec![]));
        }
        parent[i] = Some(chain[pos + 1]);
    }
    // Exactly two children per internal block, none per singleton,
    // and the children must partition the parent.
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            kids[*p].push(i);
        }
    }
    let mut children = vec![None; blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        match (b.len(), kids[i].len()) {
            (1, 0) => {}
            (len, 2) if len >= 2 => {
                let (a, c) = (kids[i][0], kids[i][1]);
                if blocks[a].len() + blocks[c].len() != b.len() {
                    return Err(TreeError::ChildrenDoNotPartition(b.labels().to_vec()));
                }
                let mut merged: Vec<u32> = blocks[a]
                    .labels()
                    .iter()
                    .chain(blocks[c].labels())
                    .copied()
                    .collect();
                merged.sort_unstable();
                if merged != b.labels() {
                    return Err(TreeError::ChildrenDoNotPartition(b.labels().to_vec()));
                }
                children[i] = Some((a, c));
            }
            _ => return Err(TreeError::NotBinary(b.labels().to_vec())),
        }
    }
    // Depths by walk from the root (parent links are acyclic: sizes shrink).
    let mut depth = vec![0u32; blocks.len()];
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(blocks[i].len()));
    for i in order {
        depth[i] = match parent[i] {
            None => 1,
            Some(p) => depth[p] + 1,
        };
    }
    Ok(TreeIndex {
        blocks,
        parent,
        children,
        depth,
        root,
        leaf_node,
    })
}

/// Check all block-set invariants and return the tree.
pub fn validate(blocks: BTreeSet<Block>, n: u32) -> Result<LabeledBinaryTree, TreeError> {
    if n == 0 {
        return Err(TreeError::EmptyTree);
    }
    build_index(blocks.iter().cloned().collect(), n)?;
    Ok(LabeledBinaryTree { n, blocks })
}

impl LabeledBinaryTree {
    /// The single-leaf tree {{1}}.
    pub fn trivial() -> Self {
        LabeledBinaryTree {
            n: 1,
            blocks: BTreeSet::from([Block::singleton(1)]),
        }
    }

    /// Construct from blocks known to be valid (outputs of internal
    /// operations). Validity is re-checked in debug builds.
    pub(crate) fn from_valid_blocks(blocks: BTreeSet<Block>, n: u32) -> Self {
        debug_assert!(build_index(blocks.iter().cloned().collect(), n).is_ok());
        LabeledBinaryTree { n, blocks }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn blocks(&self) -> &BTreeSet<Block> {
        &self.blocks
    }

    pub(crate) fn index(&self) -> TreeIndex {
        build_index(self.blocks.iter().cloned().collect(), self.n).expect("stored tree is valid")
    }

    /// Number of edges from the root vertex to leaf 1.
    pub fn leaf1_depth(&self) -> u32 {
        let idx = self.index();
        idx.depth[idx.leaf_node[0]]
    }

    /// The reduced subtree spanned by the leaves in `subset`, with labels
    /// renumbered by the increasing bijection onto [#subset].
    pub fn reduce(&self, subset: &Block) -> Result<LabeledBinaryTree, TreeError> {
        if subset.is_empty() {
            return Err(TreeError::EmptySubset);
        }
        if subset.labels().last().copied().unwrap() > self.n {
            return Err(TreeError::NotASubset(subset.labels().to_vec()));
        }
        let relabel = |x: u32| -> u32 { subset.labels().partition_point(|&y| y < x) as u32 + 1 };
        let mut out = BTreeSet::new();
        for b in &self.blocks {
            let inter = b.intersect(subset);
            if !inter.is_empty() {
                out.insert(Block(inter.into_iter().map(relabel).collect()));
            }
        }
        Ok(LabeledBinaryTree::from_valid_blocks(
            out,
            subset.len() as u32,
        ))
    }

    /// R(T_n; [k]): the reduced tree on leaves [k] where each edge carries
    /// the graph distance in the present tree between the two vertices it
    /// joins (unit edge lengths here).
    pub fn reduce_with_lengths(&self, k: u32) -> Result<EdgeLengthTree, TreeError> {
        if k == 0 {
            return Err(TreeError::EmptySubset);
        }
        if k > self.n {
            return Err(TreeError::SubsetTooLarge { k, n: self.n });
        }
        let subset = Block::full(k);
        let shape = self.reduce(&subset)?;
        let idx = self.index();
        // Depth in this tree of the vertex representing each reduced block:
        // the minimal block containing it, reached by walking up from a leaf.
        let host_depth = |reduced: &Block| -> u32 {
            let mut node = idx.leaf_node[reduced.min_label() as usize - 1];
            loop {
                let b = &idx.blocks[node];
                if reduced.labels().iter().all(|&x| b.contains(x)) {
                    return idx.depth[node];
                }
                node = idx.parent[node].expect("root contains every subset");
            }
        };
        let shape_idx = shape.index();
        let mut lengths = std::collections::BTreeMap::new();
        for (i, b) in shape_idx.blocks.iter().enumerate() {
            let here = host_depth(b);
            let above = match shape_idx.parent[i] {
                None => 0,
                Some(p) => host_depth(&shape_idx.blocks[p]),
            };
            lengths.insert(b.clone(), (here - above) as f64);
        }
        Ok(EdgeLengthTree { shape, lengths })
    }

    /// Order-free canonical code of the delabeled tree.
    pub fn delabel(&self) -> TreeShape {
        let idx = self.index();
        fn code(idx: &TreeIndex, node: usize, out: &mut String) {
            match idx.children[node] {
                None => out.push('.'),
                Some((a, b)) => {
                    let mut ca = String::new();
                    let mut cb = String::new();
                    code(idx, a, &mut ca);
                    code(idx, b, &mut cb);
                    if cb < ca {
                        std::mem::swap(&mut ca, &mut cb);
                    }
                    out.push('(');
                    out.push_str(&ca);
                    out.push_str(&cb);
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        code(&idx, idx.root, &mut s);
        TreeShape(s)
    }

    /// Sizes of the subtrees hanging off the spine (the path from the root
    /// to leaf 1), ordered from the root towards leaf 1. Parts sum to n-1;
    /// empty for the single-leaf tree.
    pub fn spinal_composition(&self) -> Composition {
        if self.n == 1 {
            return Composition::empty();
        }
        let idx = self.index();
        let mut parts = Vec::new();
        let mut node = idx.root;
        while idx.blocks[node].len() > 1 {
            let (with_min, other) = idx.split(node);
            // Leaf 1 is the smallest label everywhere on its root path.
            parts.push(idx.blocks[other].len() as u64);
            node = with_min;
        }
        Composition::new(parts).expect("subtree sizes are positive")
    }

    /// Apply a permutation of [n] to the leaf labels. `perm[i]` is the new
    /// label of leaf i+1.
    pub fn relabel(&self, perm: &[u32]) -> LabeledBinaryTree {
        assert_eq!(perm.len(), self.n as usize);
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block::new(b.labels().iter().map(|&x| perm[x as usize - 1]).collect()))
            .collect();
        LabeledBinaryTree::from_valid_blocks(blocks, self.n)
    }
}

impl fmt::Display for LabeledBinaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serialize_newick(self))
    }
}

/// Canonical code of a delabeled rooted binary tree. Two labeled trees get
/// equal codes exactly when their delabeled trees are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeShape(pub String);

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A tree shape together with one positive length per edge; the edge above
/// block B carries `lengths[B]`, the root edge is `lengths[[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengthTree {
    pub shape: LabeledBinaryTree,
    pub lengths: std::collections::BTreeMap<Block, f64>,
}

impl EdgeLengthTree {
    pub fn total_length(&self) -> f64 {
        self.lengths.values().sum()
    }

    /// Multiply every edge length by `c`.
    pub fn scaled(&self, c: f64) -> EdgeLengthTree {
        EdgeLengthTree {
            shape: self.shape.clone(),
            lengths: self
                .lengths
                .iter()
                .map(|(b, l)| (b.clone(), l * c))
                .collect(),
        }
    }
}
