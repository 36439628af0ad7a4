//! Compositions of an integer: ordered sequences of positive parts.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompositionError {
    #[error("composition parts must be positive")]
    NonPositivePart,
    #[error("cannot parse {0:?} as a composition")]
    Unparseable(String),
}

/// An ordered sequence of positive integers with a given sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Composition {
    parts: Vec<u64>,
}

impl Composition {
    pub fn new(parts: Vec<u64>) -> Result<Self, CompositionError> {
        if parts.contains(&0) {
            return Err(CompositionError::NonPositivePart);
        }
        Ok(Composition { parts })
    }

    /// The empty composition of 0 (used for the spine of a single-leaf tree).
    pub fn empty() -> Self {
        Composition { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u64] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.parts.iter().sum()
    }

    /// Suffix sums N_j = n_j + n_{j+1} + ... for j = 0..len (last entry 0).
    pub fn suffix_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.parts.len() + 1];
        for j in (0..self.parts.len()).rev() {
            sums[j] = sums[j + 1] + self.parts[j];
        }
        sums
    }

    /// All 2^(n-1) compositions of n, in lexicographic order.
    pub fn enumerate(n: u64) -> Vec<Composition> {
        assert!(n >= 1, "compositions of 0 are not enumerated");
        let mut out = Vec::new();
        let mut current = Vec::new();
        fn rec(remaining: u64, current: &mut Vec<u64>, out: &mut Vec<Composition>) {
            if remaining == 0 {
                out.push(Composition {
                    parts: current.clone(),
                });
                return;
            }
            for first in 1..=remaining {
                current.push(first);
                rec(remaining - first, current, out);
                current.pop();
            }
        }
        rec(n, &mut current, &mut out);
        out
    }
}

impl fmt::Display for Composition {
    /// Comma-separated parts, e.g. "3,1,2".
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for p in &self.parts {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Composition {
    type Err = CompositionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(Composition::empty());
        }
        let parts = s
            .split(',')
            .map(|x| x.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CompositionError::Unparseable(s.to_string()))?;
        Composition::new(parts)
    }
}
