//! Undirected simple graphs with interned node labels, plus the static
//! quantities flooding times are stated in: distance sets from a source
//! set, eccentricity, diameter, equidistantly-connected ("ec") nodes and
//! bipartiteness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense node identifier, `0..n`.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("self-loop at node {0}")]
    SelfLoop(String),
    #[error("duplicate edge {0} {1}")]
    DuplicateEdge(String, String),
    #[error("edge {0} {1} does not exist")]
    MissingEdge(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("source set is empty")]
    EmptySources,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("weight of edge {0} {1} must be a positive integer")]
    BadWeight(String, String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Unordered edge stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(NodeId, NodeId);

impl Edge {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        if u <= v {
            Edge(u, v)
        } else {
            Edge(v, u)
        }
    }

    pub fn lo(&self) -> NodeId {
        self.0
    }

    pub fn hi(&self) -> NodeId {
        self.1
    }
}

/// Finite simple undirected graph.
///
/// Neighbour lists are kept sorted so every iteration over them is in a
/// canonical order, independent of the order edges were inserted in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    labels: Vec<String>,
    adjacency: Vec<Vec<NodeId>>,
    edges: BTreeSet<Edge>,
}

impl Graph {
    /// Edgeless graph on `n` nodes labelled `"0"`, `"1"`, ...
    pub fn empty(n: usize) -> Self {
        Graph {
            labels: (0..n).map(|i| i.to_string()).collect(),
            adjacency: vec![Vec::new(); n],
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 nodes");
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle edges are simple")
    }

    pub fn path(n: usize) -> Self {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path edges are simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::from_edges(n, edges).expect("complete graph edges are simple")
    }

    /// Builds the graph whose edges are the set bits of `mask`, using the
    /// lexicographic pair order `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
    pub fn from_edge_mask(n: usize, mask: u64) -> Self {
        let mut g = Graph::empty(n);
        for (bit, (u, v)) in pair_order(n).enumerate() {
            if mask >> bit & 1 == 1 {
                g.add_edge(u, v).expect("mask edges are simple");
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.labels.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbours(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.edges.contains(&Edge::new(u, v))
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label)
    }

    /// Returns the id for `label`, appending a new isolated node if needed.
    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(id) = self.node_by_label(label) {
            return id;
        }
        self.labels.push(label.to_string());
        self.adjacency.push(Vec::new());
        self.labels.len() - 1
    }

    /// Replaces the labels; `labels.len()` must equal the node count.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.labels.len(), "label count mismatch");
        self.labels = labels;
        self
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(v.to_string()))
        }
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(self.labels[u].clone()));
        }
        if !self.edges.insert(Edge::new(u, v)) {
            return Err(GraphError::DuplicateEdge(self.labels[u].clone(), self.labels[v].clone()));
        }
        insert_sorted(&mut self.adjacency[u], v);
        insert_sorted(&mut self.adjacency[v], u);
        Ok(())
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        self.check_node(u)?;
        self.check_node(v)?;
        if !self.edges.remove(&Edge::new(u, v)) {
            return Err(GraphError::MissingEdge(self.labels[u].clone(), self.labels[v].clone()));
        }
        self.adjacency[u].retain(|&x| x != v);
        self.adjacency[v].retain(|&x| x != u);
        Ok(())
    }

    /// Removes every edge incident with `v`.
    pub fn isolate(&mut self, v: NodeId) -> Result<()> {
        self.check_node(v)?;
        for u in std::mem::take(&mut self.adjacency[v]) {
            self.edges.remove(&Edge::new(u, v));
            self.adjacency[u].retain(|&x| x != v);
        }
        Ok(())
    }

    /// Neighbour bitmask per node; only valid for graphs with at most 64 nodes.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        assert!(self.node_count() <= 64, "bitmask view needs at most 64 nodes");
        self.adjacency
            .iter()
            .map(|ns| ns.iter().fold(0u64, |m, &u| m | 1 << u))
            .collect()
    }

    /// Multi-source BFS distances; `None` for nodes unreachable from `sources`.
    pub fn distances_from<I>(&self, sources: I) -> Vec<Option<u32>>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        for s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].expect("queued nodes have a distance");
            for &u in &self.adjacency[v] {
                if dist[u].is_none() {
                    dist[u] = Some(dv + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        match self.node_count() {
            0 => true,
            _ => self.distances_from([0]).iter().all(Option::is_some),
        }
    }

    /// Two-colouring by BFS over every component.
    pub fn is_bipartite(&self) -> bool {
        let mut colour: Vec<Option<bool>> = vec![None; self.node_count()];
        for start in self.nodes() {
            if colour[start].is_some() {
                continue;
            }
            colour[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let cv = colour[v].expect("coloured");
                for &u in &self.adjacency[v] {
                    match colour[u] {
                        None => {
                            colour[u] = Some(!cv);
                            queue.push_back(u);
                        }
                        Some(cu) if cu == cv => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    /// Longest shortest path from `v`; errors if some node is unreachable.
    pub fn node_eccentricity(&self, v: NodeId) -> Result<u32> {
        self.check_node(v)?;
        max_distance(&self.distances_from([v]))
    }

    pub fn diameter(&self) -> Result<u32> {
        let mut best = 0;
        for v in self.nodes() {
            best = best.max(self.node_eccentricity(v)?);
        }
        Ok(best)
    }

    /// All-pairs distance table, `None` where unreachable.
    pub fn distance_matrix(&self) -> Vec<Vec<Option<u32>>> {
        self.nodes().map(|v| self.distances_from([v])).collect()
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.edges {
            writeln!(f, "{} {}", self.labels[e.0], self.labels[e.1])?;
        }
        Ok(())
    }
}

fn insert_sorted(list: &mut Vec<NodeId>, v: NodeId) {
    if let Err(pos) = list.binary_search(&v) {
        list.insert(pos, v);
    }
}

fn max_distance(dist: &[Option<u32>]) -> Result<u32> {
    dist.iter().try_fold(0, |m, d| d.map(|d| m.max(d)).ok_or(GraphError::Disconnected))
}

/// Lexicographic order of unordered node pairs used for edge bitmasks.
pub fn pair_order(n: usize) -> impl Iterator<Item = (NodeId, NodeId)> {
    (0..n).flat_map(move |u| (u + 1..n).map(move |v| (u, v)))
}

/// Graph whose edges carry positive integer transit times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedGraph {
    pub graph: Graph,
    weights: BTreeMap<Edge, u32>,
}

impl WeightedGraph {
    pub fn new(graph: Graph, weights: BTreeMap<Edge, u32>) -> Result<Self> {
        for e in graph.edges() {
            match weights.get(&e) {
                Some(&w) if w >= 1 => {}
                _ => {
                    return Err(GraphError::BadWeight(
                        graph.label(e.0).to_string(),
                        graph.label(e.1).to_string(),
                    ))
                }
            }
        }
        let weights = weights.into_iter().filter(|(e, _)| graph.edges.contains(e)).collect();
        Ok(WeightedGraph { graph, weights })
    }

    /// Every edge gets weight `w`.
    pub fn uniform(graph: Graph, w: u32) -> Result<Self> {
        let weights = graph.edges().map(|e| (e, w)).collect();
        WeightedGraph::new(graph, weights)
    }

    pub fn weight(&self, u: NodeId, v: NodeId) -> Option<u32> {
        self.weights.get(&Edge::new(u, v)).copied()
    }

    pub fn weights(&self) -> &BTreeMap<Edge, u32> {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.values().map(|&w| u64::from(w)).sum()
    }
}

/// Output of [`parse_edge_list`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedGraph {
    Unweighted(Graph),
    Weighted(WeightedGraph),
}

impl ParsedGraph {
    pub fn graph(&self) -> &Graph {
        match self {
            ParsedGraph::Unweighted(g) => g,
            ParsedGraph::Weighted(w) => &w.graph,
        }
    }

    pub fn into_parts(self) -> (Graph, Option<BTreeMap<Edge, u32>>) {
        match self {
            ParsedGraph::Unweighted(g) => (g, None),
            ParsedGraph::Weighted(w) => (w.graph, Some(w.weights)),
        }
    }
}

/// Parses a line-oriented edge list: `u v` or `u v w` per line, `#` comment
/// lines and blank lines ignored. Labels are interned in order of first
/// appearance. Lines must be uniformly weighted or uniformly unweighted.
pub fn parse_edge_list(text: &str) -> Result<ParsedGraph> {
    let mut graph = Graph::empty(0);
    let mut weights = BTreeMap::new();
    let mut weighted: Option<bool> = None;
    let mut ids: HashMap<String, NodeId> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| GraphError::Parse { line: line_no, reason };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let has_weight = match tokens.len() {
            2 => false,
            3 => true,
            k => return Err(err(format!("expected 2 or 3 tokens, found {k}"))),
        };
        match weighted {
            None => weighted = Some(has_weight),
            Some(w) if w != has_weight => {
                return Err(err("mixed weighted and unweighted lines".to_string()))
            }
            Some(_) => {}
        }
        let mut intern = |label: &str| {
            *ids.entry(label.to_string()).or_insert_with(|| graph.intern(label))
        };
        let u = intern(tokens[0]);
        let v = intern(tokens[1]);
        if u == v {
            return Err(err(format!("self-loop at {}", tokens[0])));
        }
        if graph.has_edge(u, v) {
            return Err(err(format!("duplicate edge {} {}", tokens[0], tokens[1])));
        }
        graph.add_edge(u, v).map_err(|e| err(e.to_string()))?;
        if has_weight {
            let w: u32 = tokens[2]
                .parse()
                .ok()
                .filter(|&w| w >= 1)
                .ok_or_else(|| err(format!("weight {:?} is not a positive integer", tokens[2])))?;
            weights.insert(Edge::new(u, v), w);
        }
    }

    if weighted == Some(true) {
        Ok(ParsedGraph::Weighted(WeightedGraph::new(graph, weights)?))
    } else {
        Ok(ParsedGraph::Unweighted(graph))
    }
}

/// Non-empty set of initial nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSet(BTreeSet<NodeId>);

impl SourceSet {
    pub fn new<I>(graph: &Graph, nodes: I) -> Result<Self>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let set: BTreeSet<NodeId> = nodes.into_iter().collect();
        if set.is_empty() {
            return Err(GraphError::EmptySources);
        }
        if let Some(&bad) = set.iter().find(|&&v| v >= graph.node_count()) {
            return Err(GraphError::UnknownNode(bad.to_string()));
        }
        Ok(SourceSet(set))
    }

    pub fn single(graph: &Graph, v: NodeId) -> Result<Self> {
        SourceSet::new(graph, [v])
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.contains(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `D_j` for every `j` at which some node sits; unreachable nodes are absent.
pub fn distance_sets(graph: &Graph, sources: &SourceSet) -> BTreeMap<u32, BTreeSet<NodeId>> {
    let mut sets: BTreeMap<u32, BTreeSet<NodeId>> = BTreeMap::new();
    for (v, d) in graph.distances_from(sources.iter()).into_iter().enumerate() {
        if let Some(d) = d {
            sets.entry(d).or_default().insert(v);
        }
    }
    sets
}

/// Nodes with a neighbour at the same distance from the sources.
pub fn ec_nodes(graph: &Graph, sources: &SourceSet) -> BTreeSet<NodeId> {
    ec_nodes_from_distances(graph, &graph.distances_from(sources.iter()))
}

pub(crate) fn ec_nodes_from_distances(graph: &Graph, dist: &[Option<u32>]) -> BTreeSet<NodeId> {
    graph
        .nodes()
        .filter(|&v| {
            dist[v].is_some() && graph.neighbours(v).iter().any(|&u| dist[u] == dist[v])
        })
        .collect()
}

/// `e(I)`: the largest distance from the source set to any node.
pub fn eccentricity(graph: &Graph, sources: &SourceSet) -> Result<u32> {
    max_distance(&graph.distances_from(sources.iter()))
}

pub fn diameter(graph: &Graph) -> Result<u32> {
    graph.diameter()
}

pub fn is_bipartite(graph: &Graph) -> bool {
    graph.is_bipartite()
}

pub fn is_ec_bipartite(graph: &Graph, sources: &SourceSet) -> bool {
    ec_nodes(graph, sources).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[NodeId]) -> BTreeSet<NodeId> {
        xs.iter().copied().collect()
    }

    #[test]
    fn parses_path() {
        let g = parse_edge_list("a b\nb c").unwrap();
        let g = g.graph();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.labels(), ["a", "b", "c"]);
        assert_eq!(g.neighbours(1), [0, 2]);
    }

    #[test]
    fn duplicate_edge_names_line() {
        let err = parse_edge_list("a b\na b").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("a b\n# c\nb a").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn parse_errors() {
        for (text, line) in [
            ("a a", 1),
            ("a b 2\nb c", 2),
            ("a b\nb c 2", 2),
            ("a b 0", 1),
            ("a b -1", 1),
            ("a b x", 1),
            ("a", 1),
            ("\n\na b c d", 3),
        ] {
            match parse_edge_list(text) {
                Err(GraphError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} -> {other:?}"),
            }
        }
    }

    #[test]
    fn parses_weights() {
        let parsed = parse_edge_list("# weights\na b 2\n\nb c 3").unwrap();
        let ParsedGraph::Weighted(w) = parsed else { panic!("expected weighted") };
        assert_eq!(w.weight(0, 1), Some(2));
        assert_eq!(w.weight(2, 1), Some(3));
        assert_eq!(w.total_weight(), 5);
    }

    #[test]
    fn canonical_regardless_of_input_order() {
        let a = parse_edge_list("x y\ny z\nz x").unwrap();
        let b = parse_edge_list("x y\nx z\nz y").unwrap();
        assert_eq!(a.graph(), b.graph());
    }

    #[test]
    fn distance_set_examples() {
        let p = Graph::path(3);
        let d = distance_sets(&p, &SourceSet::single(&p, 0).unwrap());
        assert_eq!(d, BTreeMap::from([(0, set(&[0])), (1, set(&[1])), (2, set(&[2]))]));

        let k3 = Graph::complete(3);
        let d = distance_sets(&k3, &SourceSet::single(&k3, 0).unwrap());
        assert_eq!(d, BTreeMap::from([(0, set(&[0])), (1, set(&[1, 2]))]));

        let e = Graph::path(2);
        let d = distance_sets(&e, &SourceSet::new(&e, [0, 1]).unwrap());
        assert_eq!(d, BTreeMap::from([(0, set(&[0, 1]))]));
    }

    #[test]
    fn unreachable_nodes_are_absent() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let d = distance_sets(&g, &SourceSet::single(&g, 0).unwrap());
        assert_eq!(d, BTreeMap::from([(0, set(&[0])), (1, set(&[1]))]));
        assert_eq!(eccentricity(&g, &SourceSet::single(&g, 0).unwrap()), Err(GraphError::Disconnected));
        assert_eq!(g.diameter(), Err(GraphError::Disconnected));
    }

    #[test]
    fn empty_sources_rejected() {
        let g = Graph::path(2);
        assert_eq!(SourceSet::new(&g, []), Err(GraphError::EmptySources));
        assert!(SourceSet::new(&g, [5]).is_err());
    }

    #[test]
    fn ec_node_examples() {
        let c4 = Graph::cycle(4);
        assert!(ec_nodes(&c4, &SourceSet::single(&c4, 0).unwrap()).is_empty());
        let k3 = Graph::complete(3);
        assert_eq!(ec_nodes(&k3, &SourceSet::single(&k3, 0).unwrap()), set(&[1, 2]));
        let e = Graph::path(2);
        assert_eq!(ec_nodes(&e, &SourceSet::new(&e, [0, 1]).unwrap()), set(&[0, 1]));
    }

    #[test]
    fn eccentricity_and_diameter_examples() {
        let c6 = Graph::cycle(6);
        assert_eq!(eccentricity(&c6, &SourceSet::single(&c6, 0).unwrap()), Ok(3));
        let c5 = Graph::cycle(5);
        assert_eq!(eccentricity(&c5, &SourceSet::single(&c5, 2).unwrap()), Ok(2));
        let k3 = Graph::complete(3);
        assert_eq!(eccentricity(&k3, &SourceSet::new(&k3, [0, 1, 2]).unwrap()), Ok(0));

        assert_eq!(diameter(&k3), Ok(1));
        assert_eq!(diameter(&Graph::path(4)), Ok(3));
        assert_eq!(diameter(&c6), Ok(3));
    }

    #[test]
    fn bipartite_examples() {
        let c4 = Graph::cycle(4);
        assert!(is_bipartite(&c4));
        assert!(is_ec_bipartite(&c4, &SourceSet::single(&c4, 0).unwrap()));
        let c5 = Graph::cycle(5);
        assert!(!is_bipartite(&c5));
        assert!(!is_ec_bipartite(&c5, &SourceSet::single(&c5, 0).unwrap()));
        // adjacent sources on an even cycle
        assert!(!is_ec_bipartite(&c4, &SourceSet::new(&c4, [0, 1]).unwrap()));
    }

    #[test]
    fn mutation_keeps_adjacency_symmetric() {
        let mut g = Graph::complete(4);
        g.remove_edge(2, 1).unwrap();
        assert!(!g.has_edge(1, 2));
        assert_eq!(g.neighbours(1), [0, 3]);
        assert!(g.remove_edge(1, 2).is_err());
        g.isolate(0).unwrap();
        assert_eq!(g.neighbours(0), [] as [NodeId; 0]);
        assert_eq!(g.edges().collect::<Vec<_>>(), [Edge::new(1, 3), Edge::new(2, 3)]);
        g.add_edge(3, 0).unwrap();
        assert_eq!(g.neighbours(3), [0, 1, 2]);
        assert!(g.add_edge(0, 3).is_err());
    }

    #[test]
    fn edge_mask_order() {
        // bits: (0,1) (0,2) (1,2)
        let g = Graph::from_edge_mask(3, 0b101);
        assert_eq!(g.edges().collect::<Vec<_>>(), [Edge::new(0, 1), Edge::new(1, 2)]);
    }
}
