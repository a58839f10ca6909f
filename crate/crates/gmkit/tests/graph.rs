use std::collections::{BTreeMap, BTreeSet};

use gmkit::graph::{minimal_directed_imap, node_set, ugm_from_blankets, Dag, IndependenceOracle, NodeSet, Ugm, DEFAULT_NODE_CAP};
use proptest::prelude::*;

fn ns(items: &[&str]) -> NodeSet {
    node_set(items.iter().copied())
}

/// Independent d-separation oracle: u-separation in the moralised ancestral graph.
fn moral_ancestral_separated(n: usize, edges: &[(usize, usize)], x: &BTreeSet<usize>, y: &BTreeSet<usize>, z: &BTreeSet<usize>) -> bool {
    let mut anc: BTreeSet<usize> = x.iter().chain(y).chain(z).copied().collect();
    loop {
        let before = anc.len();
        for &(p, c) in edges {
            if anc.contains(&c) {
                anc.insert(p);
            }
        }
        if anc.len() == before {
            break;
        }
    }
    let mut adj = vec![BTreeSet::new(); n];
    for &(p, c) in edges {
        if anc.contains(&p) && anc.contains(&c) {
            adj[p].insert(c);
            adj[c].insert(p);
        }
    }
    for c in &anc {
        let parents: Vec<usize> = edges.iter().filter(|(_, ch)| ch == c).map(|(p, _)| *p).collect();
        for (i, &a) in parents.iter().enumerate() {
            for &b in &parents[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    let mut seen: BTreeSet<usize> = x.clone();
    let mut stack: Vec<usize> = x.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if z.contains(&w) || !seen.insert(w) {
                continue;
            }
            if y.contains(&w) {
                return false;
            }
            stack.push(w);
        }
    }
    true
}

fn name(i: usize) -> String {
    format!("n{i}")
}

fn build_dag(n: usize, edges: &[(usize, usize)]) -> Dag {
    let names: Vec<String> = (0..n).map(name).collect();
    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for &(p, c) in edges {
        parents.entry(name(c)).or_default().push(name(p));
    }
    Dag::new(&names, &parents).unwrap()
}

/// Node count, edges `i → j` with `i < j` (hence acyclic), and a role per node:
/// 0 unused, 1 in X, 2 in Y, 3 in Z.
fn dag_query() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<u8>)> {
    (2usize..8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let m = pairs.len();
        (Just(n), proptest::collection::vec(any::<bool>(), m), proptest::collection::vec(0u8..4, n)).prop_map(move |(n, keep, roles)| {
            let edges = pairs.iter().zip(&keep).filter(|(_, k)| **k).map(|(e, _)| *e).collect();
            (n, edges, roles)
        })
    })
}

proptest! {
    #[test]
    fn d_separation_matches_moralised_ancestral_graph((n, edges, roles) in dag_query()) {
        let pick = |r: u8| -> BTreeSet<usize> { (0..n).filter(|i| roles[*i] == r).collect() };
        let (x, y, z) = (pick(1), pick(2), pick(3));
        prop_assume!(!x.is_empty() && !y.is_empty());
        let dag = build_dag(n, &edges);
        let to_names = |s: &BTreeSet<usize>| -> NodeSet { s.iter().map(|i| name(*i)).collect() };
        let got = dag.d_separated(&to_names(&x), &to_names(&y), &to_names(&z)).unwrap();
        prop_assert_eq!(got, moral_ancestral_separated(n, &edges, &x, &y, &z));
        prop_assert_eq!(got, dag.d_separated(&to_names(&y), &to_names(&x), &to_names(&z)).unwrap());
    }

    #[test]
    fn markov_blanket_screens_off_the_rest((n, edges, _roles) in dag_query(), pick in 0usize..8) {
        let dag = build_dag(n, &edges);
        let v = name(pick % n);
        let mb = dag.markov_blanket(&v).unwrap();
        let rest: NodeSet = dag.nodes().iter().filter(|m| **m != v && !mb.contains(*m)).cloned().collect();
        prop_assume!(!rest.is_empty());
        prop_assert!(dag.d_separated(&[v].into(), &rest, &mb).unwrap());
    }

    #[test]
    fn moral_graph_is_an_imap_of_the_dag((n, edges, roles) in dag_query()) {
        let pick = |r: u8| -> NodeSet { (0..n).filter(|i| roles[*i] == r).map(name).collect() };
        let (x, y, z) = (pick(1), pick(2), pick(3));
        prop_assume!(!x.is_empty() && !y.is_empty());
        let dag = build_dag(n, &edges);
        if dag.moralise().u_separated(&x, &y, &z).unwrap() {
            prop_assert!(dag.d_separated(&x, &y, &z).unwrap());
        }
    }

    #[test]
    fn equivalence_is_reflexive_and_symmetric((n, edges, _r) in dag_query(), (m, other, _s) in dag_query()) {
        let a = build_dag(n, &edges);
        prop_assert!(a.i_equivalent(&a).unwrap());
        if n == m {
            let b = build_dag(m, &other);
            prop_assert_eq!(a.i_equivalent(&b).unwrap(), b.i_equivalent(&a).unwrap());
        }
    }

    #[test]
    fn minimal_imap_from_own_topological_order_reproduces_dag((n, edges, _r) in dag_query()) {
        // a DAG is a perfect map of itself, and a topological order admits its own parent sets
        let dag = build_dag(n, &edges);
        let order = dag.topological_order().unwrap();
        let imap = minimal_directed_imap(&dag, &order, DEFAULT_NODE_CAP).unwrap();
        for v in dag.nodes() {
            let want: NodeSet = dag.parents(v).unwrap().iter().cloned().collect();
            let got: NodeSet = imap.parents(v).unwrap().iter().cloned().collect();
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn covered_edge_reversal_preserves_equivalence() {
    let a = Dag::from_edges(&[("x", "y"), ("x", "z"), ("y", "z"), ("z", "w")], &[]).unwrap();
    let b = Dag::from_edges(&[("y", "x"), ("x", "z"), ("y", "z"), ("z", "w")], &[]).unwrap();
    assert!(a.i_equivalent(&b).unwrap());
    let c = Dag::from_edges(&[("x", "y"), ("x", "z"), ("y", "z"), ("w", "z")], &[]).unwrap();
    assert!(!a.i_equivalent(&c).unwrap());
}

#[test]
fn gibbs_graph_neighbours_and_separators() {
    let g = Ugm::from_edges(&[("x1", "x2"), ("x1", "x3"), ("x1", "x4"), ("x2", "x3"), ("x2", "x5"), ("x4", "x5")], &[]).unwrap();
    assert_eq!(g.neighbors("x3").unwrap(), &ns(&["x1", "x2"]));
    assert!(g.u_separated(&ns(&["x4"]), &ns(&["x2", "x3"]), &ns(&["x1", "x5"])).unwrap());
    assert!(!g.u_separated(&ns(&["x1"]), &ns(&["x5"]), &ns(&["x2"])).unwrap());
}

#[test]
fn six_node_graph_independencies() {
    let g = Ugm::from_edges(
        &[("x1", "x3"), ("x1", "x2"), ("x2", "x4"), ("x1", "x4"), ("x3", "x4"), ("x3", "x5"), ("x4", "x5"), ("x5", "x6"), ("x4", "x6")],
        &[],
    )
    .unwrap();
    assert!(!g.u_separated(&ns(&["x3"]), &ns(&["x2"]), &ns(&["x4"])).unwrap());
    assert!(g.u_separated(&ns(&["x2"]), &ns(&["x5"]), &ns(&["x1", "x3", "x4", "x6"])).unwrap());
    assert!(g.u_separated(&ns(&["x1", "x2"]), &ns(&["x5"]), &ns(&["x3", "x4"])).unwrap());
}

#[test]
fn diamond_has_exactly_two_independencies() {
    let g = Ugm::from_edges(&[("w", "x"), ("w", "z"), ("x", "y"), ("y", "z")], &[]).unwrap();
    let nodes: Vec<String> = g.nodes().into_iter().collect();
    let mut found = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            let others: Vec<&String> = nodes.iter().filter(|n| *n != a && *n != b).collect();
            for mask in 0..1u32 << others.len() {
                let z: NodeSet = others.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, n)| (*n).clone()).collect();
                if g.u_separated(&[a.clone()].into(), &[b.clone()].into(), &z).unwrap() {
                    found.push((a.clone(), b.clone(), z));
                }
            }
        }
    }
    let want = vec![
        ("w".to_string(), "y".to_string(), ns(&["x", "z"])),
        ("x".to_string(), "z".to_string(), ns(&["w", "y"])),
    ];
    assert_eq!(found, want);
}

#[test]
fn chain_with_pendants_from_blankets() {
    let blankets: BTreeMap<String, NodeSet> = [
        ("x1", &["x2", "y1"][..]),
        ("x2", &["x1", "x3", "y2"]),
        ("x3", &["x2", "x4", "y3"]),
        ("x4", &["x3", "y4"]),
        ("y1", &["x1"]),
        ("y2", &["x2"]),
        ("y3", &["x3"]),
        ("y4", &["x4"]),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), ns(v)))
    .collect();
    let nodes: Vec<&String> = blankets.keys().collect();
    let g = ugm_from_blankets(&nodes, &blankets).unwrap();
    let mut edges = g.edges();
    edges.sort();
    let mut want: Vec<(String, String)> = [("x1", "x2"), ("x2", "x3"), ("x3", "x4"), ("x1", "y1"), ("x2", "y2"), ("x3", "y3"), ("x4", "y4")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    want.sort();
    assert_eq!(edges, want);
}

#[test]
fn blanket_graph_for_five_node_model() {
    let blankets: BTreeMap<String, NodeSet> = [
        ("a", &["q", "z"][..]),
        ("z", &["a", "q", "h"]),
        ("h", &["z"]),
        ("q", &["a", "z", "e"]),
        ("e", &["q"]),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), ns(v)))
    .collect();
    let g = ugm_from_blankets(&["a", "z", "h", "q", "e"], &blankets).unwrap();
    let dag = Dag::from_edges(&[("a", "q"), ("z", "h"), ("z", "q"), ("q", "e")], &[]).unwrap();
    let mut moral = dag.moralise().edges();
    let mut edges = g.edges();
    moral.sort();
    edges.sort();
    assert_eq!(edges, moral);
}

#[test]
fn triangulation_ordering_recovers_given_imap() {
    let cycle = Ugm::from_edges(&[("x1", "x2"), ("x1", "x3"), ("x3", "x5"), ("x2", "x4"), ("x4", "x5")], &[]).unwrap();
    let imap = minimal_directed_imap(&cycle, &["x1", "x2", "x4", "x3", "x5"], DEFAULT_NODE_CAP).unwrap();
    let want = Dag::from_edges(
        &[("x1", "x2"), ("x1", "x3"), ("x1", "x4"), ("x2", "x4"), ("x4", "x3"), ("x3", "x5"), ("x4", "x5")],
        &[],
    )
    .unwrap();
    let mut got = imap.edges();
    let mut exp = want.edges();
    got.sort();
    exp.sort();
    assert_eq!(got, exp);
    // every directed I-map of an undirected cycle must be chordal, so it has no immoralities
    assert!(imap.immoralities().is_empty());
}

#[test]
fn closure_oracle_drives_imap_search() {
    // x ⫫ y marginally, dependent otherwise: the collider x → z ← y
    let oracle = |a: &NodeSet, b: &NodeSet, given: &NodeSet| {
        let pair: NodeSet = a.union(b).cloned().collect();
        a.is_empty() || b.is_empty() || (pair == ns(&["x", "y"]) && given.is_empty())
    };
    let imap = minimal_directed_imap(&oracle, &["x", "y", "z"], DEFAULT_NODE_CAP).unwrap();
    assert!(imap.parents("y").unwrap().is_empty());
    assert_eq!(imap.parents("z").unwrap().len(), 2);
    assert!(oracle.independent(&ns(&["x"]), &ns(&["y"]), &NodeSet::new()));
}
