use std::collections::{BTreeMap, VecDeque};

use super::{check_cap, check_query, subsets_by_size, GraphError, NodeSet};

/// Undirected graph with symmetric neighbour sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ugm {
    neighbors: BTreeMap<String, NodeSet>,
}

impl Ugm {
    /// Validates symmetry; nodes absent from the map are isolated.
    pub fn new<S: AsRef<str>>(
        nodes: &[S],
        neighbors: &BTreeMap<String, NodeSet>,
    ) -> Result<Self, GraphError> {
        let mut map: BTreeMap<String, NodeSet> = BTreeMap::new();
        for n in nodes {
            if map.insert(n.as_ref().to_string(), NodeSet::new()).is_some() {
                return Err(GraphError::DuplicateNode(n.as_ref().to_string()));
            }
        }
        for (a, ns) in neighbors {
            if !map.contains_key(a) {
                return Err(GraphError::UnknownNode(a.clone()));
            }
            for b in ns {
                if !map.contains_key(b) {
                    return Err(GraphError::UnknownNode(b.clone()));
                }
                if a == b {
                    return Err(GraphError::SelfLoop(a.clone()));
                }
                if !neighbors.get(b).is_some_and(|s| s.contains(a)) {
                    return Err(GraphError::Asymmetric(a.clone(), b.clone()));
                }
            }
            map.insert(a.clone(), ns.clone());
        }
        Ok(Ugm { neighbors: map })
    }

    /// Builds a graph from undirected edges; each pair is added in both directions.
    pub fn from_pairs<I>(nodes: I, edges: Vec<(String, String)>) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut map: BTreeMap<String, NodeSet> = nodes.into_iter().map(|n| (n, NodeSet::new())).collect();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for n in [&a, &b] {
                if !map.contains_key(n) {
                    return Err(GraphError::UnknownNode(n.clone()));
                }
            }
            map.get_mut(&a).unwrap().insert(b.clone());
            map.get_mut(&b).unwrap().insert(a);
        }
        Ok(Ugm { neighbors: map })
    }

    /// Nodes are those mentioned in `edges` plus `extra`.
    pub fn from_edges(edges: &[(&str, &str)], extra: &[&str]) -> Result<Self, GraphError> {
        let nodes: NodeSet = edges
            .iter()
            .flat_map(|(a, b)| [*a, *b])
            .chain(extra.iter().copied())
            .map(String::from)
            .collect();
        let pairs = edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        Self::from_pairs(nodes, pairs)
    }

    pub fn nodes(&self) -> NodeSet {
        self.neighbors.keys().cloned().collect()
    }

    pub fn contains(&self, n: &str) -> bool {
        self.neighbors.contains_key(n)
    }

    pub fn neighbors(&self, n: &str) -> Result<&NodeSet, GraphError> {
        self.neighbors
            .get(n)
            .ok_or_else(|| GraphError::UnknownNode(n.to_string()))
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.neighbors.get(a).is_some_and(|s| s.contains(b))
    }

    /// Each edge once as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.neighbors
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (a.clone(), b.clone())))
            .collect()
    }

    pub fn markov_blanket(&self, n: &str) -> Result<NodeSet, GraphError> {
        self.neighbors(n).cloned()
    }

    /// True iff every path from `x` to `y` passes through `z`.
    pub fn u_separated(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool, GraphError> {
        check_query(&self.nodes(), x, y, z)?;
        Ok(self.separated_unchecked(x, y, z))
    }

    fn separated_unchecked(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
        let mut seen: NodeSet = x.clone();
        let mut queue: VecDeque<&String> = x.iter().collect();
        while let Some(n) = queue.pop_front() {
            for m in &self.neighbors[n] {
                if z.contains(m) || seen.contains(m) {
                    continue;
                }
                if y.contains(m) {
                    return false;
                }
                seen.insert(m.clone());
                queue.push_back(m);
            }
        }
        true
    }

    /// Smallest set separating `x` from `y`; ties go to the lexicographically first subset.
    pub fn minimal_separator(&self, x: &NodeSet, y: &NodeSet, cap: usize) -> Result<NodeSet, GraphError> {
        check_query(&self.nodes(), x, y, &NodeSet::new())?;
        for a in x {
            if let Some(b) = y.iter().find(|b| self.adjacent(a, b)) {
                return Err(GraphError::Inseparable(a.clone(), b.clone()));
            }
        }
        let pool: Vec<String> = self
            .neighbors
            .keys()
            .filter(|n| !x.contains(*n) && !y.contains(*n))
            .cloned()
            .collect();
        check_cap(pool.len(), cap)?;
        for candidate in subsets_by_size(&pool) {
            let z: NodeSet = candidate.into_iter().collect();
            if self.separated_unchecked(x, y, &z) {
                return Ok(z);
            }
        }
        unreachable!("removing every other node separates non-adjacent sets")
    }
}

/// Undirected graph connecting each node to its Markov blanket.
///
/// Edge `a – b` exists iff `b ∈ blanket(a)` or `a ∈ blanket(b)`. Nodes of `nodes` missing
/// from `blankets` have unknown blankets; they are joined to each other, since nothing
/// rules out a dependence between them.
pub fn ugm_from_blankets<S: AsRef<str>>(
    nodes: &[S],
    blankets: &BTreeMap<String, NodeSet>,
) -> Result<Ugm, GraphError> {
    let all: NodeSet = nodes.iter().map(|n| n.as_ref().to_string()).collect();
    let mut edges = Vec::new();
    for (a, bs) in blankets {
        if !all.contains(a) {
            return Err(GraphError::UnknownNode(a.clone()));
        }
        for b in bs {
            if !all.contains(b) {
                return Err(GraphError::UnknownNode(b.clone()));
            }
            edges.push((a.clone(), b.clone()));
        }
    }
    let missing: Vec<&String> = all.iter().filter(|n| !blankets.contains_key(*n)).collect();
    for (i, a) in missing.iter().enumerate() {
        for b in &missing[i + 1..] {
            edges.push(((*a).clone(), (*b).clone()));
        }
    }
    Ugm::from_pairs(all, edges)
}
