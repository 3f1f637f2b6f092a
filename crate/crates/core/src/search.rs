//! Exhaustive and randomized search over small instances.
//!
//! Enumeration is over labelled graphs in increasing edge-bitmask order
//! (bit `k` is the `k`-th pair of [`pair_order`]), so every search result is
//! reproducible.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{basic_run_violations, GraphFacts, Occurrences, Violation};
use crate::dynamics::{Mutation, MutationSchedule, ScheduledMutation};
use crate::engine::kernel::basic_round_sets;
use crate::engine::{Configuration, Instance, Verdict};
use crate::graph::{pair_order, Edge, Graph, NodeId, SourceSet};
use crate::protocol::{ForwardingRule, Initiation, InitiationSchedule, MessageId, Pick, Selector};
use crate::timing::DelayModel;

pub const MAX_ENUMERATION_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("node count {0} is outside 1..=8")]
    NodeCount(usize),
}

fn check_node_count(n: usize) -> Result<(), SearchError> {
    if (1..=MAX_ENUMERATION_NODES).contains(&n) {
        Ok(())
    } else {
        Err(SearchError::NodeCount(n))
    }
}

/// Neighbour bitmasks of the graph on `n` nodes encoded by `mask`.
fn mask_adjacency(n: usize, mask: u64, pairs: &[(NodeId, NodeId)], adj: &mut [u64]) {
    adj[..n].fill(0);
    let mut bits = mask;
    while bits != 0 {
        let k = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let (u, v) = pairs[k];
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
}

fn adjacency_connected(adj: &[u64]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut seen = 1u64;
    let mut frontier = 1u64;
    while frontier != 0 {
        let mut next = 0;
        let mut bits = frontier;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            next |= adj[v];
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen == all
}

/// Edge bitmasks of every connected labelled graph on `n` nodes, ascending.
pub fn connected_edge_masks(n: usize) -> Result<impl Iterator<Item = u64>, SearchError> {
    check_node_count(n)?;
    let pairs: Vec<_> = pair_order(n).collect();
    let mut adj = vec![0u64; n];
    Ok((0..1u64 << pairs.len()).filter(move |&mask| {
        mask_adjacency(n, mask, &pairs, &mut adj);
        adjacency_connected(&adj)
    }))
}

/// Every connected simple graph on `n` labelled nodes, once each.
pub fn enumerate_connected_graphs(n: usize) -> Result<impl Iterator<Item = Graph>, SearchError> {
    Ok(connected_edge_masks(n)?.map(move |mask| Graph::from_edge_mask(n, mask)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepViolation {
    pub nodes: usize,
    pub edge_mask: u64,
    pub source: NodeId,
    pub violation: Violation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub graphs: u64,
    pub runs: u64,
    pub violations: Vec<SweepViolation>,
}

/// Runs basic flooding from every single source of every connected graph
/// with `1..=n_max` nodes and checks the receipt bound, the termination
/// bounds, the ec characterisations, the neighbour offsets and the
/// distance structure of first and second receipts on each run.
pub fn sweep_single_source(n_max: usize) -> Result<SweepReport, SearchError> {
    check_node_count(n_max)?;
    let mut report = SweepReport::default();
    let mut sets = Vec::new();
    let mut occ = Occurrences::default();
    for n in 1..=n_max {
        for mask in connected_edge_masks(n)? {
            let graph = Graph::from_edge_mask(n, mask);
            let facts = GraphFacts::new(&graph);
            let adj = graph.adjacency_masks();
            report.graphs += 1;
            for source in 0..n {
                report.runs += 1;
                let last = basic_round_sets(&adj, 1 << source, 2 * n + 2, &mut sets);
                let Some(last) = last else {
                    let violation = Violation {
                        property: "terminates",
                        node: None,
                        round: None,
                        message: None,
                        reason: format!("still flooding after {} rounds", 2 * n + 2),
                    };
                    report.violations.push(SweepViolation { nodes: n, edge_mask: mask, source, violation });
                    continue;
                };
                occ.fill_from_masks(n, &sets);
                let sources = SourceSet::single(&graph, source).expect("source in range");
                for violation in basic_run_violations(&graph, &facts, &sources, &occ, last) {
                    report.violations.push(SweepViolation { nodes: n, edge_mask: mask, source, violation });
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sharpness {
    /// Last round `e + d + 1`.
    Upper,
    /// Non-bipartite with last round `e + 1`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SharpInstance {
    pub kind: Sharpness,
    pub nodes: usize,
    pub edge_mask: u64,
    pub source: NodeId,
    pub last_round: u32,
    pub e: u32,
    pub d: u32,
}

impl SharpInstance {
    pub fn graph(&self) -> Graph {
        Graph::from_edge_mask(self.nodes, self.edge_mask)
    }

    pub fn instance(&self) -> Instance {
        Instance::basic(self.graph(), [self.source])
    }
}

/// Single-source basic runs on connected `n`-node graphs whose last round
/// meets one of the two bounds exactly, at most `per_kind` of each kind,
/// in enumeration order.
pub fn find_sharp_instances(n: usize, per_kind: usize) -> Result<Vec<SharpInstance>, SearchError> {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut sets = Vec::new();
    for mask in connected_edge_masks(n)? {
        if upper.len() >= per_kind && lower.len() >= per_kind {
            break;
        }
        let graph = Graph::from_edge_mask(n, mask);
        let facts = GraphFacts::new(&graph);
        let d = facts.diameter.expect("connected");
        let adj = graph.adjacency_masks();
        for source in 0..n {
            let last = basic_round_sets(&adj, 1 << source, 2 * n + 2, &mut sets).expect("basic flooding terminates");
            let e = facts.node_eccentricity[source].expect("connected");
            let found = SharpInstance { kind: Sharpness::Upper, nodes: n, edge_mask: mask, source, last_round: last, e, d };
            if last == e + d + 1 && upper.len() < per_kind {
                upper.push(found.clone());
            }
            if !facts.bipartite && last == e + 1 && lower.len() < per_kind {
                lower.push(SharpInstance { kind: Sharpness::Lower, ..found });
            }
        }
    }
    upper.extend(lower);
    Ok(upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessFamily {
    /// Basic flooding, one source, fixed symmetric transit times.
    FixedDelay,
    /// Two messages under unranked full-send with per-node selectors.
    UnrankedFullSend,
    /// Basic flooding, one source, one edge added during the run.
    EdgeAddition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_nodes: usize,
    /// Largest transit time tried by [`WitnessFamily::FixedDelay`].
    pub max_weight: u32,
    /// Latest initiation or mutation round tried.
    pub max_round: u32,
    /// Stop after this many candidate runs.
    pub max_candidates: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_nodes: 6, max_weight: 4, max_round: 3, max_candidates: 5_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub family: WitnessFamily,
    pub instance: Instance,
    pub cycle_start: u32,
    pub period: u32,
    pub certificate: Configuration,
    /// Candidate runs examined, this one included.
    pub examined: u64,
}

impl Witness {
    /// Re-runs the instance and re-checks the certificate.
    pub fn reverify(&self) -> bool {
        let Ok(out) = self.instance.run(None) else { return false };
        let same = matches!(
            &out.verdict,
            Verdict::NonTerminating { cycle_start, period, certificate }
                if *cycle_start == self.cycle_start && *period == self.period && *certificate == self.certificate
        );
        same && self.instance.verify_certificate(self.cycle_start, self.period, &self.certificate) == Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Box<Witness>),
    NotFound { examined: u64 },
}

struct Searcher {
    family: WitnessFamily,
    limits: SearchLimits,
    examined: u64,
}

impl Searcher {
    fn exhausted(&self) -> bool {
        self.examined >= self.limits.max_candidates
    }

    /// Runs one candidate; returns a witness if its certificate checks out.
    fn try_instance(&mut self, instance: Instance) -> Option<Witness> {
        self.examined += 1;
        let out = instance.run(None).ok()?;
        let Verdict::NonTerminating { cycle_start, period, certificate } = out.verdict else { return None };
        if instance.verify_certificate(cycle_start, period, &certificate) != Ok(true) {
            return None;
        }
        Some(Witness { family: self.family, instance, cycle_start, period, certificate, examined: self.examined })
    }
}

/// Searches in a fixed order for an instance of `family` that provably
/// never terminates. Returns `NotFound` when the limits are exhausted.
pub fn find_nontermination_witness(family: WitnessFamily, limits: &SearchLimits) -> Result<SearchOutcome, SearchError> {
    check_node_count(limits.max_nodes)?;
    let mut s = Searcher { family, limits: *limits, examined: 0 };
    for n in 2..=limits.max_nodes {
        for mask in connected_edge_masks(n)? {
            let graph = Graph::from_edge_mask(n, mask);
            let found = match family {
                WitnessFamily::EdgeAddition => edge_addition(&mut s, &graph),
                WitnessFamily::FixedDelay => fixed_delay(&mut s, &graph),
                WitnessFamily::UnrankedFullSend => unranked(&mut s, &graph),
            };
            if let Some(w) = found {
                return Ok(SearchOutcome::Found(Box::new(w)));
            }
            if s.exhausted() {
                return Ok(SearchOutcome::NotFound { examined: s.examined });
            }
        }
    }
    Ok(SearchOutcome::NotFound { examined: s.examined })
}

fn edge_addition(s: &mut Searcher, graph: &Graph) -> Option<Witness> {
    let n = graph.node_count();
    let missing: Vec<_> = pair_order(n).filter(|&(u, v)| !graph.has_edge(u, v)).collect();
    for source in 0..n {
        for &(u, v) in &missing {
            for round in 1..=s.limits.max_round.max(1) {
                if s.exhausted() {
                    return None;
                }
                let mutations = MutationSchedule::new(vec![ScheduledMutation { round, mutation: Mutation::AddEdge(u, v) }])
                    .expect("round is positive");
                let instance = Instance::basic(graph.clone(), [source]).with_mutations(mutations);
                if let Some(w) = s.try_instance(instance) {
                    return Some(w);
                }
            }
        }
    }
    None
}

fn fixed_delay(s: &mut Searcher, graph: &Graph) -> Option<Witness> {
    let edges: Vec<Edge> = graph.edges().collect();
    let max_w = s.limits.max_weight.max(1);
    let mut weights = vec![1u32; edges.len()];
    loop {
        // odometer over weight vectors, all-ones (synchronous) skipped
        let Some(pos) = weights.iter().position(|&w| w < max_w) else { return None };
        weights[pos] += 1;
        weights[..pos].fill(1);
        let model = DelayModel::FixedWeights(edges.iter().copied().zip(weights.iter().copied()).collect());
        for source in graph.nodes() {
            if s.exhausted() {
                return None;
            }
            let instance = Instance::basic(graph.clone(), [source]).with_delays(model.clone());
            if let Some(w) = s.try_instance(instance) {
                return Some(w);
            }
        }
    }
}

fn unranked(s: &mut Searcher, graph: &Graph) -> Option<Witness> {
    let n = graph.node_count();
    for x in 0..n {
        for y in 0..n {
            for round in 0..=s.limits.max_round {
                if x == y && round == 0 {
                    continue;
                }
                let schedule = InitiationSchedule::new(vec![
                    Initiation { node: x, message: MessageId(0), round: 0 },
                    Initiation { node: y, message: MessageId(1), round },
                ])
                .expect("distinct (node, round) pairs");
                // the nodes picking the higher message, as a bitmask
                for highest in 0..1u64 << n {
                    if s.exhausted() {
                        return None;
                    }
                    let selector = Selector {
                        default: Pick::Lowest,
                        per_node: (0..n).filter(|v| highest >> v & 1 == 1).map(|v| (v, Pick::Highest)).collect(),
                    };
                    let instance = Instance::basic(graph.clone(), [])
                        .with_schedule(schedule.clone())
                        .with_rule(ForwardingRule::UnrankedFullSend(selector));
                    if let Some(w) = s.try_instance(instance) {
                        return Some(w);
                    }
                }
            }
        }
    }
    None
}

/// A connected graph on `n` nodes: a random labelled tree plus every other
/// pair independently with probability `extra`.
pub fn random_connected_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, extra: f64) -> Graph {
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(rng);
    let mut g = Graph::empty(n);
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        g.add_edge(order[i], parent).expect("tree edges are new");
    }
    for (u, v) in pair_order(n) {
        if !g.has_edge(u, v) && rng.gen_bool(extra) {
            g.add_edge(u, v).expect("checked above");
        }
    }
    g
}

/// A non-empty random subset of the nodes with at most `max` elements.
pub fn random_sources<R: Rng + ?Sized>(rng: &mut R, graph: &Graph, max: usize) -> Vec<NodeId> {
    let mut nodes: Vec<NodeId> = graph.nodes().collect();
    nodes.shuffle(rng);
    let k = rng.gen_range(1..=max.clamp(1, nodes.len()));
    nodes.truncate(k);
    nodes.sort_unstable();
    nodes
}
