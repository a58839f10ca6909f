use std::collections::BTreeMap;

use super::{check_cap, subsets_by_size, Dag, GraphError, NodeSet, Ugm};

/// Default bound on exhaustive subset searches.
pub const DEFAULT_NODE_CAP: usize = 16;

/// Answers `x ⫫ y | z` queries. An empty `x` or `y` is vacuously independent.
pub trait IndependenceOracle {
    fn independent(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool;
}

impl IndependenceOracle for Dag {
    fn independent(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
        x.is_empty() || y.is_empty() || self.d_separated(x, y, z).expect("well-formed query")
    }
}

impl IndependenceOracle for Ugm {
    fn independent(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
        x.is_empty() || y.is_empty() || self.u_separated(x, y, z).expect("well-formed query")
    }
}

impl<F> IndependenceOracle for F
where
    F: Fn(&NodeSet, &NodeSet, &NodeSet) -> bool,
{
    fn independent(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
        self(x, y, z)
    }
}

/// Minimal directed I-map for `ordering`.
///
/// Each node's parents are the first subset `π` of its predecessors, by size and then
/// lexicographically, with `x_i ⫫ pre_i \ π | π`. The result is only guaranteed minimal when
/// the oracle is a perfect map of the target distribution.
pub fn minimal_directed_imap<S: AsRef<str>>(
    oracle: &dyn IndependenceOracle,
    ordering: &[S],
    cap: usize,
) -> Result<Dag, GraphError> {
    let order: Vec<String> = ordering.iter().map(|s| s.as_ref().to_string()).collect();
    let mut seen = NodeSet::new();
    for n in &order {
        if !seen.insert(n.clone()) {
            return Err(GraphError::DuplicateNode(n.clone()));
        }
    }
    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, n) in order.iter().enumerate() {
        let mut pre: Vec<String> = order[..i].to_vec();
        pre.sort();
        check_cap(pre.len(), cap)?;
        let me: NodeSet = [n.clone()].into();
        for pi in subsets_by_size(&pre) {
            let given: NodeSet = pi.iter().cloned().collect();
            let rest: NodeSet = pre.iter().filter(|m| !given.contains(*m)).cloned().collect();
            if oracle.independent(&me, &rest, &given) {
                parents.insert(n.clone(), pi);
                break;
            }
        }
    }
    Dag::new(&order, &parents)
}
