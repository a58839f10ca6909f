use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{check_query, GraphError, IndependenceStatement, NodeSet, Ugm};

/// Directed acyclic graph with ordered parent lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: NodeSet,
    parents: BTreeMap<String, Vec<String>>,
    children: BTreeMap<String, NodeSet>,
}

/// Collider `left → child ← right` whose parents are non-adjacent; `left < right`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Immorality {
    pub left: String,
    pub child: String,
    pub right: String,
}

impl Dag {
    /// Nodes absent from `parents` have no parents.
    pub fn new<S: AsRef<str>>(
        nodes: &[S],
        parents: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self, GraphError> {
        let mut set = NodeSet::new();
        for n in nodes {
            if !set.insert(n.as_ref().to_string()) {
                return Err(GraphError::DuplicateNode(n.as_ref().to_string()));
            }
        }
        let mut pa: BTreeMap<String, Vec<String>> =
            set.iter().map(|n| (n.clone(), Vec::new())).collect();
        let mut ch: BTreeMap<String, NodeSet> =
            set.iter().map(|n| (n.clone(), NodeSet::new())).collect();
        for (child, ps) in parents {
            if !set.contains(child) {
                return Err(GraphError::UnknownNode(child.clone()));
            }
            for p in ps {
                if !set.contains(p) {
                    return Err(GraphError::UnknownNode(p.clone()));
                }
                if p == child {
                    return Err(GraphError::SelfLoop(p.clone()));
                }
                let list = pa.get_mut(child).unwrap();
                if list.contains(p) {
                    return Err(GraphError::DuplicateParent {
                        child: child.clone(),
                        parent: p.clone(),
                    });
                }
                list.push(p.clone());
                ch.get_mut(p).unwrap().insert(child.clone());
            }
        }
        let dag = Dag {
            nodes: set,
            parents: pa,
            children: ch,
        };
        dag.topological_order()?;
        Ok(dag)
    }

    /// Builds a graph from `(parent, child)` edges; nodes are those mentioned plus `extra`.
    pub fn from_edges(edges: &[(&str, &str)], extra: &[&str]) -> Result<Self, GraphError> {
        let mut nodes: Vec<String> = Vec::new();
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for n in edges.iter().flat_map(|(a, b)| [*a, *b]).chain(extra.iter().copied()) {
            if !nodes.iter().any(|m| m == n) {
                nodes.push(n.to_string());
            }
        }
        for (p, c) in edges {
            parents.entry(c.to_string()).or_default().push(p.to_string());
        }
        Self::new(&nodes, &parents)
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn contains(&self, n: &str) -> bool {
        self.nodes.contains(n)
    }

    fn require(&self, n: &str) -> Result<(), GraphError> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(n.to_string()))
        }
    }

    pub fn parents(&self, n: &str) -> Result<&[String], GraphError> {
        self.parents
            .get(n)
            .map(Vec::as_slice)
            .ok_or_else(|| GraphError::UnknownNode(n.to_string()))
    }

    pub fn parent_map(&self) -> &BTreeMap<String, Vec<String>> {
        &self.parents
    }

    pub fn children(&self, n: &str) -> Result<&NodeSet, GraphError> {
        self.children
            .get(n)
            .ok_or_else(|| GraphError::UnknownNode(n.to_string()))
    }

    /// `(parent, child)` pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = self
            .parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (p.clone(), c.clone())))
            .collect();
        e.sort();
        e
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        self.parents.get(child).is_some_and(|ps| ps.iter().any(|p| p == parent))
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// Kahn's algorithm, always taking the lexicographically smallest available node.
    pub fn topological_order(&self) -> Result<Vec<String>, GraphError> {
        let mut indeg: BTreeMap<&str, usize> = self
            .parents
            .iter()
            .map(|(n, ps)| (n.as_str(), ps.len()))
            .collect();
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n.to_string());
            for c in &self.children[n] {
                let d = indeg.get_mut(c.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < self.nodes.len() {
            let stuck = indeg
                .iter()
                .find(|(n, d)| **d > 0 && !order.iter().any(|o| o == *n))
                .map(|(n, _)| n.to_string())
                .unwrap_or_default();
            return Err(GraphError::Cycle(stuck));
        }
        Ok(order)
    }

    fn check_permutation<S: AsRef<str>>(&self, ordering: &[S]) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for n in ordering {
            self.require(n.as_ref())?;
            if !seen.insert(n.as_ref()) {
                return Err(GraphError::NotPermutation);
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(GraphError::NotPermutation);
        }
        Ok(())
    }

    fn first_violation<S: AsRef<str>>(&self, ordering: &[S]) -> Option<(String, String)> {
        let pos: BTreeMap<&str, usize> = ordering
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_ref(), i))
            .collect();
        for n in ordering {
            for p in &self.parents[n.as_ref()] {
                if pos[p.as_str()] > pos[n.as_ref()] {
                    return Some((n.as_ref().to_string(), p.clone()));
                }
            }
        }
        None
    }

    /// True iff every node comes after all of its parents.
    pub fn is_topological<S: AsRef<str>>(&self, ordering: &[S]) -> Result<bool, GraphError> {
        self.check_permutation(ordering)?;
        Ok(self.first_violation(ordering).is_none())
    }

    fn reach(&self, start: &str, next: impl Fn(&str) -> Vec<String>) -> NodeSet {
        let mut seen = NodeSet::new();
        let mut stack = next(start);
        while let Some(n) = stack.pop() {
            if seen.insert(n.clone()) {
                stack.extend(next(&n));
            }
        }
        seen.remove(start);
        seen
    }

    pub fn descendants(&self, n: &str) -> Result<NodeSet, GraphError> {
        self.require(n)?;
        Ok(self.reach(n, |m| self.children[m].iter().cloned().collect()))
    }

    pub fn ancestors(&self, n: &str) -> Result<NodeSet, GraphError> {
        self.require(n)?;
        Ok(self.reach(n, |m| self.parents[m].clone()))
    }

    /// All nodes other than `n` and its descendants.
    pub fn non_descendants(&self, n: &str) -> Result<NodeSet, GraphError> {
        let desc = self.descendants(n)?;
        Ok(self
            .nodes
            .iter()
            .filter(|m| *m != n && !desc.contains(*m))
            .cloned()
            .collect())
    }

    /// Active-trail reachability: `x ⫫ y | z` holds iff no node of `y` is reachable.
    pub fn d_separated(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool, GraphError> {
        check_query(&self.nodes, x, y, z)?;
        let reachable = self.reachable(x, z);
        Ok(y.iter().all(|n| !reachable.contains(n)))
    }

    /// Nodes connected to some node of `x` by a trail that is active given `z`.
    pub fn reachable(&self, x: &NodeSet, z: &NodeSet) -> NodeSet {
        // z together with its ancestors: colliders in this set are open
        let mut opens_collider: NodeSet = z.clone();
        for n in z {
            if let Ok(a) = self.ancestors(n) {
                opens_collider.extend(a);
            }
        }
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
        enum Dir {
            FromChild,
            FromParent,
        }
        let mut visited: BTreeSet<(String, Dir)> = BTreeSet::new();
        let mut queue: VecDeque<(String, Dir)> =
            x.iter().map(|n| (n.clone(), Dir::FromChild)).collect();
        let mut reachable = NodeSet::new();
        while let Some((n, d)) = queue.pop_front() {
            if !visited.insert((n.clone(), d)) {
                continue;
            }
            let observed = z.contains(&n);
            if !observed {
                reachable.insert(n.clone());
            }
            match d {
                Dir::FromChild if !observed => {
                    queue.extend(self.parents[&n].iter().map(|p| (p.clone(), Dir::FromChild)));
                    queue.extend(self.children[&n].iter().map(|c| (c.clone(), Dir::FromParent)));
                }
                Dir::FromChild => {}
                Dir::FromParent => {
                    if !observed {
                        queue.extend(self.children[&n].iter().map(|c| (c.clone(), Dir::FromParent)));
                    }
                    if opens_collider.contains(&n) {
                        queue.extend(self.parents[&n].iter().map(|p| (p.clone(), Dir::FromChild)));
                    }
                }
            }
        }
        for n in x {
            reachable.remove(n);
        }
        reachable
    }

    /// Parents, children and co-parents of `n`.
    pub fn markov_blanket(&self, n: &str) -> Result<NodeSet, GraphError> {
        self.require(n)?;
        let mut mb: NodeSet = self.parents[n].iter().cloned().collect();
        for c in &self.children[n] {
            mb.insert(c.clone());
            mb.extend(self.parents[c].iter().cloned());
        }
        mb.remove(n);
        Ok(mb)
    }

    /// `x_i ⫫ (pre_i \ pa_i) | pa_i` for each node with a non-empty difference.
    pub fn ordered_markov_independencies<S: AsRef<str>>(
        &self,
        ordering: &[S],
    ) -> Result<Vec<IndependenceStatement>, GraphError> {
        self.check_permutation(ordering)?;
        if let Some((child, parent)) = self.first_violation(ordering) {
            return Err(GraphError::NotTopological { child, parent });
        }
        let mut out = Vec::new();
        for (i, n) in ordering.iter().enumerate() {
            let pa: NodeSet = self.parents[n.as_ref()].iter().cloned().collect();
            let rest: NodeSet = ordering[..i]
                .iter()
                .map(|m| m.as_ref().to_string())
                .filter(|m| !pa.contains(m))
                .collect();
            if !rest.is_empty() {
                out.push(IndependenceStatement {
                    left: [n.as_ref().to_string()].into(),
                    right: rest,
                    given: pa,
                });
            }
        }
        Ok(out)
    }

    /// `x_i ⫫ (nondesc(x_i) \ pa_i) | pa_i` for each node, in lexicographic node order.
    pub fn local_markov_independencies(&self) -> Vec<IndependenceStatement> {
        let mut out = Vec::new();
        for n in &self.nodes {
            let pa: NodeSet = self.parents[n].iter().cloned().collect();
            let rest: NodeSet = self
                .non_descendants(n)
                .expect("node exists")
                .into_iter()
                .filter(|m| !pa.contains(m))
                .collect();
            if !rest.is_empty() {
                out.push(IndependenceStatement {
                    left: [n.clone()].into(),
                    right: rest,
                    given: pa,
                });
            }
        }
        out
    }

    pub fn skeleton(&self) -> Ugm {
        let edges: Vec<(String, String)> = self.edges();
        Ugm::from_pairs(self.nodes.iter().cloned(), edges).expect("skeleton of a valid DAG")
    }

    /// Skeleton plus an edge between every pair of parents sharing a child.
    pub fn moralise(&self) -> Ugm {
        let mut edges = self.edges();
        for ps in self.parents.values() {
            for (i, a) in ps.iter().enumerate() {
                for b in &ps[i + 1..] {
                    edges.push((a.clone(), b.clone()));
                }
            }
        }
        Ugm::from_pairs(self.nodes.iter().cloned(), edges).expect("moral graph of a valid DAG")
    }

    pub fn immoralities(&self) -> BTreeSet<Immorality> {
        let mut out = BTreeSet::new();
        for (c, ps) in &self.parents {
            for (i, a) in ps.iter().enumerate() {
                for b in &ps[i + 1..] {
                    if !self.adjacent(a, b) {
                        let (l, r) = if a < b { (a, b) } else { (b, a) };
                        out.insert(Immorality {
                            left: l.clone(),
                            child: c.clone(),
                            right: r.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Same skeleton and same immoralities.
    pub fn i_equivalent(&self, other: &Dag) -> Result<bool, GraphError> {
        if self.nodes != other.nodes {
            return Err(GraphError::NodeSetMismatch);
        }
        Ok(self.skeleton() == other.skeleton() && self.immoralities() == other.immoralities())
    }

    /// The sub-graph induced by `keep`.
    pub fn induced(&self, keep: &NodeSet) -> Dag {
        let nodes: Vec<String> = self.nodes.iter().filter(|n| keep.contains(*n)).cloned().collect();
        let parents = nodes
            .iter()
            .map(|n| {
                let ps = self.parents[n].iter().filter(|p| keep.contains(*p)).cloned().collect();
                (n.clone(), ps)
            })
            .collect();
        Dag::new(&nodes, &parents).expect("induced sub-graph of a DAG")
    }
}

#[cfg(test)]
mod tests {
    use super::super::node_set;
    use super::*;

    fn five() -> Dag {
        Dag::from_edges(&[("a", "q"), ("z", "h"), ("z", "q"), ("q", "e")], &[]).unwrap()
    }

    #[test]
    fn rejects_cycles_and_bad_edges() {
        assert!(matches!(
            Dag::from_edges(&[("a", "b"), ("b", "a")], &[]),
            Err(GraphError::Cycle(_))
        ));
        assert!(matches!(
            Dag::from_edges(&[("a", "a")], &[]),
            Err(GraphError::SelfLoop(_))
        ));
        let mut pa = BTreeMap::new();
        pa.insert("a".to_string(), vec!["ghost".to_string()]);
        assert!(matches!(Dag::new(&["a"], &pa), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn topological_checks() {
        let g = five();
        assert!(g.is_topological(&["a", "z", "h", "q", "e"]).unwrap());
        assert!(!g.is_topological(&["a", "z", "e", "h", "q"]).unwrap());
        assert!(g.is_topological(&["a", "z", "q"]).is_err());
        assert!(matches!(
            g.is_topological(&["a", "z", "h", "q", "zz"]),
            Err(GraphError::UnknownNode(_))
        ));
        let empty = Dag::from_edges(&[], &["p", "q", "r"]).unwrap();
        assert!(empty.is_topological(&["r", "p", "q"]).unwrap());
    }

    #[test]
    fn descendants_and_non_descendants() {
        let g = five();
        assert_eq!(g.descendants("z").unwrap(), node_set(["q", "e", "h"]));
        assert!(g.descendants("e").unwrap().is_empty());
        assert_eq!(g.non_descendants("q").unwrap(), node_set(["a", "z", "h"]));
    }

    #[test]
    fn query_validation() {
        let g = five();
        let e = NodeSet::new();
        assert!(matches!(
            g.d_separated(&e, &node_set(["a"]), &e),
            Err(GraphError::EmptySet("x"))
        ));
        assert!(matches!(
            g.d_separated(&node_set(["a"]), &node_set(["a"]), &e),
            Err(GraphError::OverlappingSets(_))
        ));
    }

    #[test]
    fn chain_ordered_markov() {
        let g = Dag::from_edges(&[("x1", "x2"), ("x2", "x3")], &[]).unwrap();
        let s = g.ordered_markov_independencies(&["x1", "x2", "x3"]).unwrap();
        assert_eq!(s, vec![IndependenceStatement::new(["x3"], ["x1"], ["x2"])]);
        let pair = Dag::from_edges(&[], &["x1", "x2"]).unwrap();
        let s = pair.ordered_markov_independencies(&["x1", "x2"]).unwrap();
        assert_eq!(
            s,
            vec![IndependenceStatement::new(["x2"], ["x1"], Vec::<&str>::new())]
        );
        assert!(matches!(
            g.ordered_markov_independencies(&["x2", "x1", "x3"]),
            Err(GraphError::NotTopological { .. })
        ));
    }

    #[test]
    fn complete_dag_has_no_local_statements() {
        let g = Dag::from_edges(&[("a", "b"), ("a", "c"), ("b", "c")], &[]).unwrap();
        assert!(g.local_markov_independencies().is_empty());
    }

    #[test]
    fn chain_moralises_to_skeleton() {
        let g = Dag::from_edges(&[("a", "b"), ("b", "c"), ("c", "d")], &[]).unwrap();
        assert_eq!(g.moralise(), g.skeleton());
        assert!(g.immoralities().is_empty());
    }

    #[test]
    fn isolated_blanket_is_empty() {
        let g = Dag::from_edges(&[("a", "b")], &["c"]).unwrap();
        assert!(g.markov_blanket("c").unwrap().is_empty());
        assert!(g.markov_blanket("nope").is_err());
    }
}
