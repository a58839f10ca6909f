//! Exact message passing on factor trees.
//!
//! Sum-product messages are kept as a payload with maximum entry 1 plus an accumulated
//! natural-log scale, so the linear message is `payload · exp(log_scale)`. Max-sum runs in
//! the log domain and records, for every factor-to-variable message, the maximising
//! configuration of the factor's other variables.
//!
//! Graphs must be acyclic. Disconnected graphs (forests) are accepted; each component is
//! handled independently and the log partition functions add.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::factor::{Factor, FactorError, Variable};
use crate::graph::{Dag, GraphError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MessageError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("name {0} is used twice")]
    DuplicateName(String),
    #[error("variable {0} is not declared")]
    UndeclaredVariable(String),
    #[error("factor {0} has an empty scope")]
    EmptyScope(String),
    #[error("unknown factor {0}")]
    UnknownFactor(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("factor graph contains a cycle")]
    NotATree,
    #[error("factor graph is not connected")]
    Disconnected,
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("no CPT for node {0}")]
    MissingCpt(String),
    #[error("CPT for node {node} has scope {scope:?}, expected the node and its parents")]
    MisScopedCpt { node: String, scope: Vec<String> },
    #[error("CPT for node {node} sums to {sum} at parent configuration {config}")]
    UnnormalisedCpt { node: String, config: usize, sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Node {
    Var(usize),
    Fac(usize),
}

/// Bipartite graph of variables and named factors; edges follow factor scopes.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<Variable>,
    factors: Vec<(String, Factor)>,
    var_index: BTreeMap<String, usize>,
    var_factors: Vec<Vec<usize>>,
    factor_vars: Vec<Vec<usize>>,
}

/// A directed message, identified by node names.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: String,
    pub to: String,
    /// Payload with maximum entry 1.
    pub payload: Vec<f64>,
    pub log_scale: f64,
}

impl Message {
    /// The message in the linear domain, `payload · exp(log_scale)`.
    pub fn linear(&self) -> Vec<f64> {
        let s = self.log_scale.exp();
        self.payload.iter().map(|x| x * s).collect()
    }
}

/// Messages grouped into parallel steps; each message depends only on earlier groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub groups: Vec<Vec<(String, String)>>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn message_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Result of [`FactorGraph::sum_product`].
#[derive(Debug, Clone, PartialEq)]
pub struct SumProduct {
    pub marginals: BTreeMap<String, Vec<f64>>,
    pub log_partition: f64,
    messages: BTreeMap<(String, String), Message>,
}

impl SumProduct {
    pub fn message(&self, from: &str, to: &str) -> Option<&Message> {
        self.messages.get(&(from.to_string(), to.to_string()))
    }

    pub fn messages(&self) -> impl Iterator<Item = &Message> {
        self.messages.values()
    }

    pub fn marginal(&self, var: &str) -> Option<&[f64]> {
        self.marginals.get(var).map(Vec::as_slice)
    }

    /// Normalised joint over the scope of factor `name`: the factor times its incoming
    /// variable-to-factor messages. `fg` must be the graph this result came from.
    pub fn factor_joint(&self, fg: &FactorGraph, name: &str) -> Result<Factor, MessageError> {
        let f = fg
            .factors
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| MessageError::UnknownFactor(name.to_string()))?;
        let factor = &fg.factors[f].1;
        let mut joint = factor.clone();
        for &v in &fg.factor_vars[f] {
            let var = &fg.variables[v];
            let mut payload = vec![1.0; var.card];
            for &g in &fg.var_factors[v] {
                if g == f {
                    continue;
                }
                let m = &self.messages[&(fg.factors[g].0.clone(), var.name.clone())];
                payload.iter_mut().zip(&m.payload).for_each(|(a, b)| *a *= b);
            }
            let incoming = Factor::new(vec![var.clone()], payload)?;
            joint = joint.product(&incoming)?;
        }
        let names: Vec<&str> = factor.names().collect();
        let joint = joint.permute(&names)?;
        Ok(joint.normalise().map_err(|_| MessageError::ImpossibleEvidence)?.0)
    }
}

/// Result of [`FactorGraph::max_sum_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub assignment: BTreeMap<String, usize>,
    /// Log of the unnormalised joint at the assignment.
    pub log_score: f64,
    /// Log-domain messages sent toward the root.
    pub messages: BTreeMap<(String, String), Vec<f64>>,
}

impl FactorGraph {
    pub fn new(variables: Vec<Variable>, factors: Vec<(String, Factor)>) -> Result<Self, MessageError> {
        let mut var_index = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            if var_index.insert(v.name.clone(), i).is_some() {
                return Err(MessageError::DuplicateName(v.name.clone()));
            }
        }
        let mut factor_names = BTreeMap::new();
        let mut var_factors = vec![Vec::new(); variables.len()];
        let mut factor_vars = Vec::with_capacity(factors.len());
        for (f, (name, factor)) in factors.iter().enumerate() {
            if var_index.contains_key(name) || factor_names.insert(name.clone(), f).is_some() {
                return Err(MessageError::DuplicateName(name.clone()));
            }
            if factor.scope().is_empty() {
                return Err(MessageError::EmptyScope(name.clone()));
            }
            let mut vs = Vec::with_capacity(factor.scope().len());
            for sv in factor.scope() {
                let &i = var_index
                    .get(&sv.name)
                    .ok_or_else(|| MessageError::UndeclaredVariable(sv.name.clone()))?;
                if variables[i].card != sv.card {
                    return Err(FactorError::CardinalityConflict {
                        name: sv.name.clone(),
                        left: variables[i].card,
                        right: sv.card,
                    }
                    .into());
                }
                var_factors[i].push(f);
                vs.push(i);
            }
            factor_vars.push(vs);
        }
        Ok(FactorGraph {
            variables,
            factors,
            var_index,
            var_factors,
            factor_vars,
        })
    }

    /// Declares variables in order of first appearance across the factor scopes.
    pub fn from_factors(factors: Vec<(String, Factor)>) -> Result<Self, MessageError> {
        let mut variables: Vec<Variable> = Vec::new();
        for (_, f) in &factors {
            for v in f.scope() {
                if !variables.iter().any(|u| u.name == v.name) {
                    variables.push(v.clone());
                }
            }
        }
        Self::new(variables, factors)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[(String, Factor)] {
        &self.factors
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.var_index.get(name).map(|&i| &self.variables[i])
    }

    fn name(&self, n: Node) -> &str {
        match n {
            Node::Var(i) => &self.variables[i].name,
            Node::Fac(f) => &self.factors[f].0,
        }
    }

    fn neighbours(&self, n: Node) -> Vec<Node> {
        match n {
            Node::Var(i) => self.var_factors[i].iter().map(|&f| Node::Fac(f)).collect(),
            Node::Fac(f) => self.factor_vars[f].iter().map(|&i| Node::Var(i)).collect(),
        }
    }

    fn all_nodes(&self) -> impl Iterator<Item = Node> {
        (0..self.variables.len())
            .map(Node::Var)
            .chain((0..self.factors.len()).map(Node::Fac))
    }

    /// Connected components, each listed as its nodes in discovery order from the
    /// lowest-index variable (or factor) it contains.
    fn components(&self) -> Vec<Vec<Node>> {
        let mut seen: BTreeMap<Node, ()> = BTreeMap::new();
        let mut out = Vec::new();
        for start in self.all_nodes() {
            if seen.contains_key(&start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start, ());
            while let Some(n) = queue.pop_front() {
                comp.push(n);
                for m in self.neighbours(n) {
                    if seen.insert(m, ()).is_none() {
                        queue.push_back(m);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    fn edge_count(&self) -> usize {
        self.factor_vars.iter().map(Vec::len).sum()
    }

    /// True iff the graph has no cycle.
    pub fn is_forest(&self) -> bool {
        let nodes = self.variables.len() + self.factors.len();
        self.edge_count() + self.components().len() == nodes
    }

    /// True iff the graph is connected and acyclic.
    pub fn is_tree(&self) -> bool {
        self.is_forest() && self.components().len() <= 1
    }

    fn require_forest(&self) -> Result<(), MessageError> {
        if self.is_forest() {
            Ok(())
        } else {
            Err(MessageError::NotATree)
        }
    }

    /// Conditions every factor on the evidence and removes the observed variables.
    ///
    /// Factors left without variables are dropped; the log of their product is returned.
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<(FactorGraph, f64), MessageError> {
        for (name, state) in evidence {
            let v = self
                .variable(name)
                .ok_or_else(|| MessageError::UnknownVariable(name.to_string()))?;
            if *state >= v.card {
                return Err(FactorError::StateOutOfRange {
                    name: name.to_string(),
                    state: *state,
                    card: v.card,
                }
                .into());
            }
        }
        let mut log_constant = 0.0;
        let mut factors = Vec::with_capacity(self.factors.len());
        for (name, f) in &self.factors {
            let g = f.restrict(evidence)?;
            if g.scope().is_empty() {
                log_constant += g.values()[0].ln();
            } else {
                factors.push((name.clone(), g));
            }
        }
        let variables = self
            .variables
            .iter()
            .filter(|v| !evidence.iter().any(|(n, _)| *n == v.name))
            .cloned()
            .collect();
        Ok((FactorGraph::new(variables, factors)?, log_constant))
    }

    /// Directed messages needed for all marginals: every edge in both directions except
    /// those addressed to factors with a single variable.
    fn message_list(&self) -> Vec<(Node, Node)> {
        let mut out = Vec::new();
        for (f, vs) in self.factor_vars.iter().enumerate() {
            for &v in vs {
                out.push((Node::Fac(f), Node::Var(v)));
                if vs.len() > 1 {
                    out.push((Node::Var(v), Node::Fac(f)));
                }
            }
        }
        out
    }

    fn grouped_messages(&self) -> Vec<Vec<(Node, Node)>> {
        let msgs = self.message_list();
        let mut depth: BTreeMap<(Node, Node), usize> = BTreeMap::new();
        let mut pending = msgs;
        let mut groups: Vec<Vec<(Node, Node)>> = Vec::new();
        while !pending.is_empty() {
            let level = groups.len();
            let (ready, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|(from, to)| {
                self.neighbours(*from)
                    .into_iter()
                    .filter(|n| n != to)
                    .all(|n| depth.get(&(n, *from)).is_some_and(|d| *d < level))
            });
            assert!(!ready.is_empty(), "acyclic graphs always make progress");
            for m in &ready {
                depth.insert(*m, level);
            }
            groups.push(ready);
            pending = rest;
        }
        groups
    }

    /// Minimal grouping of messages into parallel steps.
    pub fn schedule(&self) -> Result<Schedule, MessageError> {
        if !self.is_tree() {
            return Err(if self.is_forest() {
                MessageError::Disconnected
            } else {
                MessageError::NotATree
            });
        }
        let groups = self
            .grouped_messages()
            .into_iter()
            .map(|g| {
                g.into_iter()
                    .map(|(a, b)| (self.name(a).to_string(), self.name(b).to_string()))
                    .collect()
            })
            .collect();
        Ok(Schedule { groups })
    }

    fn compute_message(
        &self,
        from: Node,
        to: Node,
        done: &BTreeMap<(Node, Node), (Vec<f64>, f64)>,
    ) -> Result<(Vec<f64>, f64), MessageError> {
        let (mut payload, mut log_scale) = match (from, to) {
            (Node::Var(v), Node::Fac(f)) => {
                let mut p = vec![1.0; self.variables[v].card];
                let mut s = 0.0;
                for &g in &self.var_factors[v] {
                    if g == f {
                        continue;
                    }
                    let (m, ms) = &done[&(Node::Fac(g), from)];
                    p.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                    s += ms;
                }
                (p, s)
            }
            (Node::Fac(f), Node::Var(v)) => {
                let factor = &self.factors[f].1;
                let vars = &self.factor_vars[f];
                let target = vars.iter().position(|&u| u == v).unwrap();
                let incoming: Vec<Option<&(Vec<f64>, f64)>> = vars
                    .iter()
                    .map(|&u| (u != v).then(|| &done[&(Node::Var(u), from)]))
                    .collect();
                let s: f64 = incoming.iter().flatten().map(|(_, ms)| ms).sum();
                let mut p = vec![0.0; self.variables[v].card];
                for (i, x) in factor.values().iter().enumerate() {
                    if *x == 0.0 {
                        continue;
                    }
                    let states = factor.states_at(i);
                    let mut w = *x;
                    for (k, m) in incoming.iter().enumerate() {
                        if let Some((m, _)) = m {
                            w *= m[states[k]];
                        }
                    }
                    p[states[target]] += w;
                }
                (p, s)
            }
            _ => unreachable!("messages alternate between variables and factors"),
        };
        let max = payload.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(MessageError::ImpossibleEvidence);
        }
        payload.iter_mut().for_each(|x| *x /= max);
        log_scale += max.ln();
        Ok((payload, log_scale))
    }

    /// Sum-product on a connected factor tree.
    pub fn sum_product(&self) -> Result<SumProduct, MessageError> {
        if !self.is_forest() {
            return Err(MessageError::NotATree);
        }
        if !self.is_tree() {
            return Err(MessageError::Disconnected);
        }
        self.run_sum_product(0.0)
    }

    /// Conditions on `evidence` and runs sum-product on what remains.
    ///
    /// The remaining graph may be disconnected. The log partition function includes the
    /// constant factors dropped by conditioning, so it equals the log probability (or log
    /// unnormalised mass) of the evidence.
    pub fn conditioned_sum_product(&self, evidence: &[(&str, usize)]) -> Result<SumProduct, MessageError> {
        let (g, log_constant) = self.condition(evidence)?;
        if log_constant == f64::NEG_INFINITY {
            return Err(MessageError::ImpossibleEvidence);
        }
        g.require_forest()?;
        g.run_sum_product(log_constant)
    }

    fn run_sum_product(&self, log_constant: f64) -> Result<SumProduct, MessageError> {
        let mut done: BTreeMap<(Node, Node), (Vec<f64>, f64)> = BTreeMap::new();
        for group in self.grouped_messages() {
            let computed: Vec<_> = group
                .iter()
                .map(|&(a, b)| self.compute_message(a, b, &done).map(|m| ((a, b), m)))
                .collect::<Result<_, _>>()?;
            done.extend(computed);
        }
        let mut marginals = BTreeMap::new();
        let mut var_log_z = vec![0.0; self.variables.len()];
        for (v, var) in self.variables.iter().enumerate() {
            let mut p = vec![1.0; var.card];
            let mut s = 0.0;
            for &f in &self.var_factors[v] {
                let (m, ms) = &done[&(Node::Fac(f), Node::Var(v))];
                p.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                s += ms;
            }
            let z: f64 = p.iter().sum();
            if !(z > 0.0) {
                return Err(MessageError::ImpossibleEvidence);
            }
            var_log_z[v] = z.ln() + s;
            marginals.insert(var.name.clone(), p.iter().map(|x| x / z).collect());
        }
        let mut log_partition = log_constant;
        for comp in self.components() {
            match comp.iter().find_map(|n| match n {
                Node::Var(v) => Some(*v),
                Node::Fac(_) => None,
            }) {
                Some(v) => log_partition += var_log_z[v],
                None => unreachable!("factors have non-empty scopes"),
            }
        }
        let messages = done
            .into_iter()
            .map(|((a, b), (payload, log_scale))| {
                let from = self.name(a).to_string();
                let to = self.name(b).to_string();
                let m = Message {
                    from: from.clone(),
                    to: to.clone(),
                    payload,
                    log_scale,
                };
                ((from, to), m)
            })
            .collect();
        Ok(SumProduct {
            marginals,
            log_partition,
            messages,
        })
    }

    /// Normalised joint over the scope of factor `name`.
    pub fn factor_joint(&self, name: &str) -> Result<Factor, MessageError> {
        if self.factor(name).is_none() {
            return Err(MessageError::UnknownFactor(name.to_string()));
        }
        self.sum_product()?.factor_joint(self, name)
    }

    /// Max-sum with backtracking from `root`.
    ///
    /// Other components of a forest are rooted at their first variable. Ties go to the
    /// configuration with the lowest flat index (first scope variable fastest).
    pub fn max_sum_map(&self, root: &str) -> Result<MapEstimate, MessageError> {
        self.require_forest()?;
        let &root = self
            .var_index
            .get(root)
            .ok_or_else(|| MessageError::UnknownVariable(root.to_string()))?;
        let mut comps = self.components();
        comps.sort_by_key(|c| !c.contains(&Node::Var(root)));

        let mut assignment: BTreeMap<String, usize> = BTreeMap::new();
        let mut messages = BTreeMap::new();
        let mut log_score = 0.0;
        for comp in comps {
            let r = if comp.contains(&Node::Var(root)) {
                Node::Var(root)
            } else {
                match comp.iter().find(|n| matches!(n, Node::Var(_))) {
                    Some(n) => *n,
                    None => continue,
                }
            };
            // breadth-first order from the root; parents precede children
            let mut order = vec![r];
            let mut parent: BTreeMap<Node, Node> = BTreeMap::new();
            let mut i = 0;
            while i < order.len() {
                let n = order[i];
                for m in self.neighbours(n) {
                    if parent.get(&n) != Some(&m) && m != r && !parent.contains_key(&m) {
                        parent.insert(m, n);
                        order.push(m);
                    }
                }
                i += 1;
            }
            let mut lambda: BTreeMap<(Node, Node), Vec<f64>> = BTreeMap::new();
            let mut backtrack: BTreeMap<Node, Vec<usize>> = BTreeMap::new();
            for &n in order.iter().rev() {
                let Some(&p) = parent.get(&n) else { continue };
                let children: Vec<Node> = self
                    .neighbours(n)
                    .into_iter()
                    .filter(|m| *m != p)
                    .collect();
                let msg = match (n, p) {
                    (Node::Var(v), _) => {
                        let mut m = vec![0.0; self.variables[v].card];
                        for c in &children {
                            m.iter_mut().zip(&lambda[&(*c, n)]).for_each(|(a, b)| *a += b);
                        }
                        m
                    }
                    (Node::Fac(f), Node::Var(pv)) => {
                        let factor = &self.factors[f].1;
                        let vars = &self.factor_vars[f];
                        let target = vars.iter().position(|&u| u == pv).unwrap();
                        let mut best = vec![f64::NEG_INFINITY; self.variables[pv].card];
                        let mut arg = vec![usize::MAX; self.variables[pv].card];
                        for (idx, x) in factor.values().iter().enumerate() {
                            let states = factor.states_at(idx);
                            let mut score = x.ln();
                            for (k, &u) in vars.iter().enumerate() {
                                if k != target {
                                    score += lambda[&(Node::Var(u), n)][states[k]];
                                }
                            }
                            let t = states[target];
                            if score > best[t] || arg[t] == usize::MAX {
                                best[t] = score;
                                arg[t] = idx;
                            }
                        }
                        backtrack.insert(n, arg);
                        best
                    }
                    _ => unreachable!("bipartite"),
                };
                messages.insert((self.name(n).to_string(), self.name(p).to_string()), msg.clone());
                lambda.insert((n, p), msg);
            }
            let Node::Var(rv) = r else { unreachable!() };
            let mut belief = vec![0.0; self.variables[rv].card];
            for c in self.neighbours(r) {
                belief.iter_mut().zip(&lambda[&(c, r)]).for_each(|(a, b)| *a += b);
            }
            let mut best = 0;
            for (s, b) in belief.iter().enumerate() {
                if *b > belief[best] {
                    best = s;
                }
            }
            if belief[best] == f64::NEG_INFINITY || belief[best].is_nan() {
                return Err(MessageError::ImpossibleEvidence);
            }
            log_score += belief[best];
            let mut states: BTreeMap<usize, usize> = BTreeMap::from([(rv, best)]);
            for &n in &order {
                let Node::Fac(f) = n else { continue };
                let Node::Var(pv) = parent[&n] else { unreachable!() };
                let idx = backtrack[&n][states[&pv]];
                let config = self.factors[f].1.states_at(idx);
                for (k, &u) in self.factor_vars[f].iter().enumerate() {
                    states.entry(u).or_insert(config[k]);
                }
            }
            for (v, s) in states {
                assignment.insert(self.variables[v].name.clone(), s);
            }
        }
        for (v, var) in self.variables.iter().enumerate() {
            if self.var_factors[v].is_empty() {
                assignment.insert(var.name.clone(), 0);
            }
        }
        Ok(MapEstimate {
            assignment,
            log_score,
            messages,
        })
    }

    /// Unnormalised joint value of a full assignment (brute-force helper).
    pub fn joint_value(&self, assignment: &BTreeMap<String, usize>) -> f64 {
        self.factors
            .iter()
            .map(|(_, f)| {
                let states: Vec<usize> = f.names().map(|n| assignment[n]).collect();
                f.get(&states)
            })
            .product()
    }
}

/// One factor per conditional probability table.
///
/// Each CPT's scope must be the node together with its parents (any order), and must sum
/// to one over the node for every parent configuration. Factor names are `p(<node>)`.
pub fn dag_to_factor_graph(dag: &Dag, cpts: &BTreeMap<String, Factor>) -> Result<FactorGraph, MessageError> {
    let mut factors = Vec::new();
    for node in dag.topological_order()? {
        let cpt = cpts
            .get(&node)
            .ok_or_else(|| MessageError::MissingCpt(node.clone()))?;
        let mut expected: Vec<&str> = dag.parents(&node)?.iter().map(String::as_str).collect();
        expected.push(&node);
        let mut actual: Vec<&str> = cpt.names().collect();
        let mut sorted_expected = expected.clone();
        sorted_expected.sort();
        actual.sort();
        if actual != sorted_expected {
            return Err(MessageError::MisScopedCpt {
                node: node.clone(),
                scope: cpt.names().map(String::from).collect(),
            });
        }
        let sums = cpt.sum_out(&node)?;
        if let Some((config, sum)) = sums
            .values()
            .iter()
            .enumerate()
            .find(|(_, s)| (**s - 1.0).abs() > 1e-9)
        {
            return Err(MessageError::UnnormalisedCpt {
                node: node.clone(),
                config,
                sum: *sum,
            });
        }
        factors.push((format!("p({node})"), cpt.clone()));
    }
    for n in cpts.keys() {
        if !dag.contains(n) {
            return Err(GraphError::UnknownNode(n.clone()).into());
        }
    }
    FactorGraph::from_factors(factors)
}
