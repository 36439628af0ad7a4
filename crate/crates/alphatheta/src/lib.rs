//! A laboratory for (α, θ) random binary tree growth.
//!
//! The crate grows leaf-labeled binary trees by the two-parameter recursive
//! edge-selection rule, runs the associated ordered Chinese Restaurant
//! Process and its regenerative composition structure, computes exact
//! finite-n distributions with rational arithmetic, simulates regenerative
//! interval partitions and strings of beads, and drives the bead-crushing
//! chain that approximates the limiting weighted continuum tree.
//!
//! Modules mirror the layers of the model:
//!
//! * [`trees`] — leaf-labeled binary trees as collections of label blocks,
//!   reduction, delabeling and Newick/JSON serialization;
//! * [`growth`] — sequential samplers: the (α, θ) rule, the leaf/internal
//!   edge-weight rule, and the α = 0 walker model;
//! * [`crp`] — the ordered Chinese Restaurant Process, its decrement matrix
//!   and composition probabilities;
//! * [`exact`] — exact rational distributions over small trees, splitting
//!   rules and sampling-consistency checks;
//! * [`limits`] — Dirichlet/urn/GEM samplers, interval partitions,
//!   local-time moments, Laplace exponents and dislocation densities;
//! * [`beads`] — bead trees and the bead-crushing Markov chain;
//! * [`stats`] — seeded goodness-of-fit machinery shared by the Monte Carlo
//!   suites;
//! * [`verify`] — the end-to-end verification suite exposed by the CLI.

pub mod beads;
pub mod composition;
pub mod crp;
pub mod exact;
pub mod growth;
pub mod limits;
pub mod params;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod trees;
pub mod verify;

pub use composition::Composition;
pub use params::Params;
pub use rng::RngFactory;
pub use trees::{Block, EdgeLengthTree, LabeledBinaryTree, TreeShape};
