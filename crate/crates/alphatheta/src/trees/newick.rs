//! Newick-compatible text form for labeled trees.
//!
//! The whole tree is wrapped in one outer group representing the root
//! vertex, so the two-leaf tree prints as `((1,2));`. Each edge may carry a
//! `:length` suffix on the vertex below it; the root edge length follows
//! the outer group of the top vertex, e.g. `((1:0.5,2:0.25):1);`.

use super::{Block, EdgeLengthTree, LabeledBinaryTree, TreeError};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NewickError {
    #[error("parse error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid tree structure: {0}")]
    Structure(#[from] TreeError),
}

pub fn serialize_newick(tree: &LabeledBinaryTree) -> String {
    render(tree, None)
}

pub fn serialize_newick_with_lengths(tree: &EdgeLengthTree) -> String {
    render(&tree.shape, Some(&tree.lengths))
}

fn render(tree: &LabeledBinaryTree, lengths: Option<&BTreeMap<Block, f64>>) -> String {
    let idx = tree.index();
    fn rec(
        idx: &super::TreeIndex,
        lengths: Option<&BTreeMap<Block, f64>>,
        node: usize,
        out: &mut String,
    ) {
        match idx.children[node] {
            None => out.push_str(&idx.blocks[node].min_label().to_string()),
            Some((a, b)) => {
                out.push('(');
                rec(idx, lengths, a, out);
                out.push(',');
                rec(idx, lengths, b, out);
                out.push(')');
            }
        }
        if let Some(lens) = lengths {
            if let Some(l) = lens.get(&idx.blocks[node]) {
                out.push(':');
                out.push_str(&l.to_string());
            }
        }
    }
    let mut s = String::from("(");
    rec(&idx, lengths, idx.root, &mut s);
    s.push_str(");");
    s
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

#[derive(Debug)]
enum Node {
    Leaf(u32),
    Internal(Box<Node>, Box<Node>),
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: &str) -> Result<T, NewickError> {
        Err(NewickError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), NewickError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected {:?}", b as char))
        }
    }

    fn subtree(&mut self, lengths: &mut Vec<(Vec<u32>, f64)>) -> Result<Node, NewickError> {
        let node = match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let left = self.subtree(lengths)?;
                self.expect(b',')?;
                let right = self.subtree(lengths)?;
                self.expect(b')')?;
                Node::Internal(Box::new(left), Box::new(right))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let label: u32 = std::str::from_utf8(&self.bytes[start..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| NewickError::Syntax {
                        offset: start,
                        message: "label out of range".into(),
                    })?;
                Node::Leaf(label)
            }
            _ => return self.err("expected '(' or a leaf label"),
        };
        if self.peek() == Some(b':') {
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|c| {
                c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E')
            }) {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
            let value: f64 = text.parse().map_err(|_| NewickError::Syntax {
                offset: start,
                message: "malformed edge length".into(),
            })?;
            lengths.push((collect_labels(&node), value));
        }
        Ok(node)
    }
}

fn collect_labels(node: &Node) -> Vec<u32> {
    fn rec(node: &Node, out: &mut Vec<u32>) {
        match node {
            Node::Leaf(x) => out.push(*x),
            Node::Internal(a, b) => {
                rec(a, out);
                rec(b, out);
            }
        }
    }
    let mut v = Vec::new();
    rec(node, &mut v);
    v.sort_unstable();
    v
}

/// Parse the text form back into a tree, along with edge lengths when any
/// `:length` suffix was present.
pub fn parse_newick(
    text: &str,
) -> Result<(LabeledBinaryTree, Option<BTreeMap<Block, f64>>), NewickError> {
    let mut p = Parser {
        bytes: text.trim().as_bytes(),
        pos: 0,
    };
    p.expect(b'(')?;
    let mut raw_lengths = Vec::new();
    let top = p.subtree(&mut raw_lengths)?;
    p.expect(b')')?;
    p.expect(b';')?;
    if p.pos != p.bytes.len() {
        return p.err("trailing characters after ';'");
    }
    let labels = collect_labels(&top);
    let n = labels.len() as u32;
    for (i, &x) in labels.iter().enumerate() {
        if x != i as u32 + 1 {
            return Err(NewickError::Syntax {
                offset: 0,
                message: format!("leaf labels must be exactly 1..{n}"),
            });
        }
    }
    let mut blocks = BTreeSet::new();
    fn collect_blocks(node: &Node, blocks: &mut BTreeSet<Block>) -> Block {
        match node {
            Node::Leaf(x) => {
                let b = Block::singleton(*x);
                blocks.insert(b.clone());
                b
            }
            Node::Internal(a, c) => {
                let ba = collect_blocks(a, blocks);
                let bc = collect_blocks(c, blocks);
                let merged = Block::new(ba.labels().iter().chain(bc.labels()).copied().collect());
                blocks.insert(merged.clone());
                merged
            }
        }
    }
    collect_blocks(&top, &mut blocks);
    let tree = super::validate(blocks, n)?;
    let lengths = if raw_lengths.is_empty() {
        None
    } else {
        Some(
            raw_lengths
                .into_iter()
                .map(|(labels, v)| (Block::new(labels), v))
                .collect(),
        )
    };
    Ok((tree, lengths))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaf_round_trip() {
        let (t, lens) = parse_newick("((1,2));").unwrap();
        assert_eq!(t.n(), 2);
        assert!(lens.is_none());
        assert_eq!(serialize_newick(&t), "((1,2));");
    }

    #[test]
    fn lengths_round_trip() {
        let text = "((1:0.5,2:0.25):1);";
        let (t, lens) = parse_newick(text).unwrap();
        let lens = lens.unwrap();
        assert_eq!(lens[&Block::singleton(1)], 0.5);
        assert_eq!(lens[&Block::new(vec![1, 2])], 1.0);
        let elt = EdgeLengthTree {
            shape: t,
            lengths: lens,
        };
        assert_eq!(serialize_newick_with_lengths(&elt), text);
    }

    #[test]
    fn error_carries_offset() {
        let err = parse_newick("((1,2)").unwrap_err();
        match err {
            NewickError::Syntax { offset, .. } => assert_eq!(offset, 6),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_newick("((1,3));").is_err());
        assert!(parse_newick("((1,2)); junk").is_err());
    }

    #[test]
    fn single_leaf_forms() {
        let (t, _) = parse_newick("(1);").unwrap();
        assert_eq!(t, LabeledBinaryTree::trivial());
        assert_eq!(serialize_newick(&t), "(1);");
    }
}
