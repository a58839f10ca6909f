//! Directed and undirected graphs over named variables, with independence queries.
//!
//! Node names are opaque, case-sensitive strings. Every set-valued result is a
//! [`NodeSet`] (lexicographically ordered), so outputs are deterministic.

mod dag;
mod imap;
mod ugm;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use dag::{Dag, Immorality};
pub use imap::{minimal_directed_imap, IndependenceOracle, DEFAULT_NODE_CAP};
pub use ugm::{ugm_from_blankets, Ugm};

pub type NodeSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} declared twice")]
    DuplicateNode(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("parent {parent} listed twice for {child}")]
    DuplicateParent { child: String, parent: String },
    #[error("graph has a directed cycle through {0}")]
    Cycle(String),
    #[error("neighbour relation is not symmetric between {0} and {1}")]
    Asymmetric(String, String),
    #[error("query sets overlap at {0}")]
    OverlappingSets(String),
    #[error("query set {0} is empty")]
    EmptySet(&'static str),
    #[error("ordering is not a permutation of the nodes")]
    NotPermutation,
    #[error("ordering is not topological: {parent} must precede {child}")]
    NotTopological { child: String, parent: String },
    #[error("graphs have different node sets")]
    NodeSetMismatch,
    #[error("{0} and {1} are adjacent, so no separator exists")]
    Inseparable(String, String),
    #[error("{nodes} nodes exceed the exhaustive-search cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
}

/// `left ⫫ right | given`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndependenceStatement {
    pub left: NodeSet,
    pub right: NodeSet,
    pub given: NodeSet,
}

impl IndependenceStatement {
    pub fn new<I, J, K, S>(left: I, right: J, given: K) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = S>,
        K: IntoIterator<Item = S>,
        S: Into<String>,
    {
        IndependenceStatement {
            left: left.into_iter().map(Into::into).collect(),
            right: right.into_iter().map(Into::into).collect(),
            given: given.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &NodeSet| s.iter().cloned().collect::<Vec<_>>().join(",");
        write!(f, "{{{}}} ⫫ {{{}}}", join(&self.left), join(&self.right))?;
        if !self.given.is_empty() {
            write!(f, " | {{{}}}", join(&self.given))?;
        }
        Ok(())
    }
}

/// Builds a [`NodeSet`] from string-like items.
pub fn node_set<I, S>(items: I) -> NodeSet
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    items.into_iter().map(Into::into).collect()
}

fn check_query(
    known: &NodeSet,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> Result<(), GraphError> {
    if x.is_empty() {
        return Err(GraphError::EmptySet("x"));
    }
    if y.is_empty() {
        return Err(GraphError::EmptySet("y"));
    }
    for n in x.iter().chain(y).chain(z) {
        if !known.contains(n) {
            return Err(GraphError::UnknownNode(n.clone()));
        }
    }
    let overlap = x
        .intersection(y)
        .chain(x.intersection(z))
        .chain(y.intersection(z))
        .next();
    if let Some(n) = overlap {
        return Err(GraphError::OverlappingSets(n.clone()));
    }
    Ok(())
}

/// Subsets of `pool` ordered by size, then lexicographically; `pool` must be sorted.
fn subsets_by_size(pool: &[String]) -> impl Iterator<Item = Vec<String>> + '_ {
    use itertools::Itertools;
    (0..=pool.len()).flat_map(move |k| pool.iter().cloned().combinations(k))
}

fn check_cap(nodes: usize, cap: usize) -> Result<(), GraphError> {
    if nodes > cap {
        Err(GraphError::TooManyNodes { nodes, cap })
    } else {
        Ok(())
    }
}
