//! Theorem checks over finished traces.
//!
//! Every check recomputes distances, eccentricities and ec nodes from the
//! graph itself and reads only round sets and deliveries from the trace, so
//! it can be pointed at a trace loaded from disk as easily as at a fresh
//! run. A check that does not apply to the run it is given (wrong rule,
//! delays, mutations, or an unfinished run) says so instead of failing.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Instance, RunOutcome, Trace};
use crate::graph::{ec_nodes_from_distances, Graph, NodeId, SourceSet};
use crate::protocol::{InitiationSchedule, MessageId, RuleKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("check not applicable: {0}")]
    NotApplicable(String),
}

fn not_applicable<T>(reason: impl Into<String>) -> Result<T, AnalysisError> {
    Err(AnalysisError::NotApplicable(reason.into()))
}

/// A counterexample to one of the checked statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<MessageId>,
    pub reason: String,
}

impl Violation {
    fn new(property: &'static str, reason: impl Into<String>) -> Self {
        Violation { property, node: None, round: None, message: None, reason: reason.into() }
    }

    fn at_node(mut self, node: NodeId) -> Self {
        self.node = Some(node);
        self
    }

    fn at_round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    fn for_message(mut self, message: MessageId) -> Self {
        self.message = Some(message);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail { violation: Violation },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub check: &'static str,
    #[serde(flatten)]
    pub status: CheckStatus,
}

impl CheckReport {
    fn from_result(check: &'static str, result: Result<(), Violation>) -> Self {
        let status = match result {
            Ok(()) => CheckStatus::Pass,
            Err(violation) => CheckStatus::Fail { violation },
        };
        CheckReport { check, status }
    }

    fn from_error(check: &'static str, err: AnalysisError) -> Self {
        let AnalysisError::NotApplicable(reason) = err;
        CheckReport { check, status: CheckStatus::NotApplicable { reason } }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, CheckStatus::Fail { .. })
    }
}

/// First and second round-set membership of every node, plus the total
/// number of memberships.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Occurrences {
    pub first: Vec<Option<u32>>,
    pub second: Vec<Option<u32>>,
    pub count: Vec<u32>,
}

impl Occurrences {
    pub fn from_node_rounds(rounds: &[Vec<u32>]) -> Self {
        Occurrences {
            first: rounds.iter().map(|r| r.first().copied()).collect(),
            second: rounds.iter().map(|r| r.get(1).copied()).collect(),
            count: rounds.iter().map(|r| r.len() as u32).collect(),
        }
    }

    pub fn from_trace(trace: &Trace, node_count: usize) -> Self {
        Occurrences::from_node_rounds(&trace.node_rounds(node_count))
    }

    /// Refills `self` from round-set bitmasks `R_0, R_1, ...`.
    pub fn fill_from_masks(&mut self, node_count: usize, round_sets: &[u64]) {
        self.first.clear();
        self.first.resize(node_count, None);
        self.second.clear();
        self.second.resize(node_count, None);
        self.count.clear();
        self.count.resize(node_count, 0);
        for (round, &set) in round_sets.iter().enumerate() {
            let mut bits = set;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                match self.count[v] {
                    0 => self.first[v] = Some(round as u32),
                    1 => self.second[v] = Some(round as u32),
                    _ => {}
                }
                self.count[v] += 1;
            }
        }
    }
}

/// Graph-wide quantities shared by every source set on the same graph.
#[derive(Debug, Clone)]
pub struct GraphFacts {
    pub distances: Vec<Vec<Option<u32>>>,
    pub node_eccentricity: Vec<Option<u32>>,
    pub diameter: Option<u32>,
    pub bipartite: bool,
}

impl GraphFacts {
    pub fn new(graph: &Graph) -> Self {
        let distances = graph.distance_matrix();
        let node_eccentricity: Vec<Option<u32>> = distances
            .iter()
            .map(|row| row.iter().try_fold(0, |m, d| d.map(|d| m.max(d))))
            .collect();
        let diameter = node_eccentricity.iter().try_fold(0, |m, e| e.map(|e| m.max(e)));
        GraphFacts { distances, node_eccentricity, diameter, bipartite: graph.is_bipartite() }
    }

    pub fn distances_from(&self, sources: &SourceSet) -> Vec<Option<u32>> {
        let n = self.distances.len();
        (0..n)
            .map(|v| sources.iter().filter_map(|s| self.distances[s][v]).min())
            .collect()
    }
}

/// Termination-time bounds for one basic run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub e_i: u32,
    pub diameter: u32,
    pub last_round: u32,
    pub bipartite: bool,
    pub ec_bipartite: bool,
    /// `min d(I, g) + e(g) + 1` over ec nodes `g`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<u32>,
    /// `min e(g) + 1` over ec nodes `g` that are themselves sources.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_ec_bound: Option<u32>,
    pub passed: bool,
    pub reason: String,
}

/// Source-set quantities for one run, derived from [`GraphFacts`].
struct SourceFacts {
    dist: Vec<Option<u32>>,
    ec: BTreeSet<NodeId>,
    e_i: u32,
}

impl SourceFacts {
    fn new(graph: &Graph, facts: &GraphFacts, sources: &SourceSet) -> Option<Self> {
        let dist = facts.distances_from(sources);
        let e_i = dist.iter().try_fold(0, |m, d| d.map(|d| m.max(d)))?;
        let ec = ec_nodes_from_distances(graph, &dist);
        Some(SourceFacts { dist, ec, e_i })
    }
}

fn bound_report(
    facts: &GraphFacts,
    src: &SourceFacts,
    sources: &SourceSet,
    last_round: u32,
) -> BoundReport {
    let ecc = |g: NodeId| facts.node_eccentricity[g].expect("connected graph");
    let upper_bound = src
        .ec
        .iter()
        .map(|&g| src.dist[g].expect("reachable") + ecc(g) + 1)
        .min();
    let source_ec_bound = src.ec.iter().filter(|&&g| sources.contains(g)).map(|&g| ecc(g) + 1).min();
    let ec_bipartite = src.ec.is_empty();
    let e_i = src.e_i;

    let (passed, reason) = if ec_bipartite {
        (last_round == e_i, format!("ec-bipartite: expected last round {e_i}, got {last_round}"))
    } else {
        let upper = upper_bound.expect("ec nodes exist");
        let mut ok = e_i < last_round && last_round <= upper;
        let mut reason = format!("not ec-bipartite: expected {e_i} < {last_round} <= {upper}");
        if let Some(b) = source_ec_bound {
            ok &= last_round <= b;
            reason.push_str(&format!(" and {last_round} <= {b} (ec source)"));
        }
        (ok, reason)
    };
    BoundReport {
        e_i,
        diameter: facts.diameter.expect("connected graph"),
        last_round,
        bipartite: facts.bipartite,
        ec_bipartite,
        upper_bound,
        source_ec_bound,
        passed,
        reason,
    }
}

fn receipt_bound(occ: &Occurrences) -> Result<(), Violation> {
    match occ.count.iter().position(|&c| c > 2) {
        None => Ok(()),
        Some(v) => Err(Violation::new("receipt-bound", format!("node in {} round sets", occ.count[v]))
            .at_node(v)
            .at_round(occ.second[v].unwrap_or(0))),
    }
}

fn ec_equivalence(src: &SourceFacts, occ: &Occurrences) -> Result<(), Violation> {
    let expected = if src.ec.is_empty() { 1 } else { 2 };
    for (v, d) in src.dist.iter().enumerate() {
        if d.is_some() && occ.count[v] != expected {
            return Err(Violation::new(
                "ec-receipt-equivalence",
                format!(
                    "{} ec nodes, yet node is in {} round sets (expected {expected})",
                    if src.ec.is_empty() { "no" } else { "some" },
                    occ.count[v]
                ),
            )
            .at_node(v));
        }
    }
    Ok(())
}

fn second_visit_offsets(graph: &Graph, occ: &Occurrences) -> Result<(), Violation> {
    for h in graph.nodes() {
        let Some(j) = occ.second[h] else { continue };
        for &g in graph.neighbours(h) {
            let ok = occ.second[g].is_some_and(|k| k + 1 >= j && k <= j + 1);
            if !ok {
                return Err(Violation::new(
                    "second-visit-offsets",
                    format!("neighbour {h} is in its second round set at {j}, node's second is {:?}", occ.second[g]),
                )
                .at_node(g)
                .at_round(j));
            }
        }
    }
    Ok(())
}

/// First membership at exactly the node's distance, and ec nodes at
/// distance `j` in their second round set at `j + 1`.
fn equidistant_second_visit(src: &SourceFacts, occ: &Occurrences) -> Result<(), Violation> {
    for (v, d) in src.dist.iter().enumerate() {
        let Some(d) = *d else { continue };
        if occ.first[v] != Some(d) {
            return Err(Violation::new(
                "distance-first-receipt",
                format!("node at distance {d} first in round set {:?}", occ.first[v]),
            )
            .at_node(v));
        }
        if src.ec.contains(&v) && occ.second[v] != Some(d + 1) {
            return Err(Violation::new(
                "ec-second-receipt",
                format!("ec node at distance {d} second in round set {:?}", occ.second[v]),
            )
            .at_node(v)
            .at_round(d + 1));
        }
    }
    Ok(())
}

/// Every node at distance `j` sends to each neighbour at distance `j + 1`
/// in round `j + 1`.
fn distance_layer_sends(graph: &Graph, src: &SourceFacts, trace: &Trace) -> Result<(), Violation> {
    for g in graph.nodes() {
        let Some(j) = src.dist[g] else { continue };
        for &h in graph.neighbours(g) {
            if src.dist[h] != Some(j + 1) {
                continue;
            }
            let sent = trace
                .round(j + 1)
                .is_some_and(|r| r.delivered.iter().any(|d| d.from == g && d.to == h));
            if !sent {
                return Err(Violation::new("distance-layer-sends", format!("no send to {h} in round {}", j + 1))
                    .at_node(g)
                    .at_round(j + 1));
            }
        }
    }
    Ok(())
}

/// Checks for a basic, synchronous, static, finished run started from
/// `sources` in round 0 on a connected graph.
fn basic_round_zero_context(graph: &Graph, sources: &SourceSet, trace: &Trace) -> Result<SourceFacts, AnalysisError> {
    let info = trace.info;
    if info.rule != RuleKind::Basic {
        return not_applicable(format!("stated for basic flooding, run used {}", info.rule));
    }
    if !info.synchronous || !info.static_graph {
        return not_applicable("stated for synchronous flooding on a static graph");
    }
    if !info.terminated {
        return not_applicable("run did not terminate");
    }
    let round_zero: BTreeSet<NodeId> =
        trace.round(0).map(|r| r.initiated.iter().map(|&(v, _)| v).collect()).unwrap_or_default();
    let later = trace.rounds.iter().skip(1).any(|r| !r.initiated.is_empty());
    if later || round_zero != sources.iter().collect() {
        return not_applicable("stated for a single round-0 initiation by exactly the source set");
    }
    if !graph.is_connected() {
        return not_applicable("stated for connected graphs");
    }
    let facts = GraphFacts::new(graph);
    Ok(SourceFacts::new(graph, &facts, sources).expect("connected"))
}

/// Number of rounds in which each node received or initiated each message.
pub fn receive_counts(trace: &Trace) -> BTreeMap<(NodeId, MessageId), u32> {
    trace.receipt_rounds().into_iter().map(|(k, rounds)| (k, rounds.len() as u32)).collect()
}

/// At most two receipts per `(node, message)`, for the rules and settings
/// where that is guaranteed: basic, partial-send and ranked full-send,
/// synchronous, with one flooding per message and no edges added.
pub fn check_receive_counts(trace: &Trace, schedule: &InitiationSchedule, mutations_remove_only: bool) -> Result<CheckReport, AnalysisError> {
    let info = trace.info;
    match info.rule {
        RuleKind::Basic | RuleKind::Partial | RuleKind::Ranked => {}
        RuleKind::Unranked => return not_applicable("no receipt bound for unranked full-send"),
        RuleKind::SinkReversal => return not_applicable("no receipt bound for the sink deviation"),
    }
    if !info.synchronous {
        return not_applicable("no receipt bound under delays");
    }
    if !mutations_remove_only {
        return not_applicable("no receipt bound when edges or nodes are added");
    }
    let mut floodings: BTreeMap<MessageId, usize> = BTreeMap::new();
    for e in schedule.entries() {
        *floodings.entry(e.message).or_default() += 1;
    }
    let single_round_basic =
        info.rule == RuleKind::Basic && schedule.entries().iter().all(|e| e.round == 0);
    if !single_round_basic && floodings.values().any(|&c| c > 1) {
        return not_applicable("a message is flooded more than once");
    }
    let result = trace
        .receipt_rounds()
        .into_iter()
        .find(|(_, rounds)| rounds.len() > 2)
        .map_or(Ok(()), |((v, m), rounds)| {
            Err(Violation::new("receipt-bound", format!("received in rounds {rounds:?}"))
                .at_node(v)
                .for_message(m)
                .at_round(rounds[2]))
        });
    Ok(CheckReport::from_result("receipt-bound", result))
}

/// Termination-time bounds for basic flooding from `sources` in round 0.
pub fn check_bounds(graph: &Graph, sources: &SourceSet, trace: &Trace) -> Result<BoundReport, AnalysisError> {
    let src = basic_round_zero_context(graph, sources, trace)?;
    let facts = GraphFacts::new(graph);
    Ok(bound_report(&facts, &src, sources, trace.last_round()))
}

/// ec nodes exist iff every node is in exactly two round sets; otherwise
/// every node is in exactly one.
pub fn check_ec_equivalences(graph: &Graph, sources: &SourceSet, trace: &Trace) -> Result<CheckReport, AnalysisError> {
    let src = basic_round_zero_context(graph, sources, trace)?;
    let occ = Occurrences::from_trace(trace, graph.node_count());
    Ok(CheckReport::from_result("ec-receipt-equivalence", ec_equivalence(&src, &occ)))
}

/// Neighbours enter their second round set at most one round apart.
pub fn check_second_visit_offsets(graph: &Graph, sources: &SourceSet, trace: &Trace) -> Result<CheckReport, AnalysisError> {
    basic_round_zero_context(graph, sources, trace)?;
    let occ = Occurrences::from_trace(trace, graph.node_count());
    Ok(CheckReport::from_result("second-visit-offsets", second_visit_offsets(graph, &occ)))
}

/// Nodes first receive at their distance from the sources, every node at
/// distance `j` sends to its neighbours at distance `j + 1` in round
/// `j + 1`, and ec nodes at distance `j` receive for the second time in
/// round `j + 1`.
pub fn check_equidistant_second_visit(graph: &Graph, sources: &SourceSet, trace: &Trace) -> Result<CheckReport, AnalysisError> {
    let src = basic_round_zero_context(graph, sources, trace)?;
    let occ = Occurrences::from_trace(trace, graph.node_count());
    let result = equidistant_second_visit(&src, &occ).and_then(|()| distance_layer_sends(graph, &src, trace));
    Ok(CheckReport::from_result("equidistant-second-visit", result))
}

/// Every statement above for one single-source or multi-source basic run,
/// evaluated from precomputed graph facts and round-set occurrences.
/// Used by the exhaustive sweeps; an empty result means no counterexample.
pub fn basic_run_violations(
    graph: &Graph,
    facts: &GraphFacts,
    sources: &SourceSet,
    occ: &Occurrences,
    last_round: u32,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(src) = SourceFacts::new(graph, facts, sources) else {
        out.push(Violation::new("connected", "graph is disconnected"));
        return out;
    };
    if let Err(v) = receipt_bound(occ) {
        out.push(v);
    }
    let report = bound_report(facts, &src, sources, last_round);
    if !report.passed {
        out.push(Violation::new("termination-bounds", report.reason).at_round(last_round));
    }
    if sources.len() == 1 {
        let e = src.e_i;
        let d = facts.diameter.expect("connected");
        let ok = if facts.bipartite { last_round == e } else { e < last_round && last_round <= e + d + 1 };
        if !ok {
            out.push(
                Violation::new(
                    "single-source-bounds",
                    format!("bipartite={} e={e} d={d} last={last_round}", facts.bipartite),
                )
                .at_round(last_round),
            );
        }
        if facts.bipartite != src.ec.is_empty() {
            out.push(Violation::new("bipartite-iff-no-ec", "bipartiteness and ec-bipartiteness disagree"));
        }
    }
    for result in [
        ec_equivalence(&src, occ),
        second_visit_offsets(graph, occ),
        equidistant_second_visit(&src, occ),
    ] {
        if let Err(v) = result {
            out.push(v);
        }
    }
    out
}

/// Per-message round sets for ranked full-send: for `M_h` initiated in
/// round `i_h`, the set for round `i_h` holds the nodes initiating some
/// `M_h'` with `h' >= h` in that round, and each later set holds the nodes
/// initiating or receiving some `M_h'` with `h' >= h`. Only non-empty sets
/// are stored.
pub type MessageRoundSets = BTreeMap<MessageId, BTreeMap<u32, BTreeSet<NodeId>>>;

pub fn message_round_sets(trace: &Trace, schedule: &InitiationSchedule) -> Result<MessageRoundSets, AnalysisError> {
    if trace.info.rule != RuleKind::Ranked && schedule.messages().len() > 1 {
        return not_applicable("per-message round sets are defined for ranked full-send");
    }
    if schedule.check_rank_order().is_err() && schedule.messages().len() > 1 {
        return not_applicable("schedule is not rank ordered");
    }
    let mut out = MessageRoundSets::new();
    for init in schedule.entries() {
        let h = init.message;
        let sets = out.entry(h).or_default();
        for state in trace.rounds.iter().filter(|r| r.round >= init.round) {
            let mut set: BTreeSet<NodeId> =
                state.initiated.iter().filter(|&&(_, m)| m >= h).map(|&(v, _)| v).collect();
            if state.round > init.round {
                set.extend(state.delivered.iter().filter(|d| d.message >= h).map(|d| d.to));
            }
            if !set.is_empty() {
                sets.entry(state.round).or_default().extend(set);
            }
        }
    }
    Ok(out)
}

/// A single broadcaster streaming messages in strictly increasing rounds
/// under ranked full-send: every node reachable from it gets every message
/// once or twice.
pub fn check_broadcast_delivery(graph: &Graph, trace: &Trace, schedule: &InitiationSchedule) -> Result<CheckReport, AnalysisError> {
    if trace.info.rule != RuleKind::Ranked {
        return not_applicable("stated for ranked full-send");
    }
    if !trace.info.synchronous || !trace.info.static_graph || !trace.info.terminated {
        return not_applicable("stated for finished synchronous runs on a static graph");
    }
    let broadcasters = schedule.nodes();
    if broadcasters.len() != 1 {
        return not_applicable(format!("stated for one broadcaster, schedule has {}", broadcasters.len()));
    }
    let entries = schedule.entries();
    if entries.windows(2).any(|w| w[0].round >= w[1].round) || schedule.messages().len() != entries.len() {
        return not_applicable("stated for distinct messages in strictly increasing rounds");
    }
    let source = *broadcasters.first().expect("one broadcaster");
    let reachable: Vec<NodeId> = graph
        .distances_from([source])
        .iter()
        .enumerate()
        .filter_map(|(v, d)| d.map(|_| v))
        .collect();
    let counts = receive_counts(trace);
    for e in entries {
        for &v in &reachable {
            let c = counts.get(&(v, e.message)).copied().unwrap_or(0);
            if !(1..=2).contains(&c) {
                let violation = Violation::new("broadcast-delivery", format!("received {c} times"))
                    .at_node(v)
                    .for_message(e.message);
                return Ok(CheckReport::from_result("broadcast-delivery", Err(violation)));
            }
        }
    }
    Ok(CheckReport::from_result("broadcast-delivery", Ok(())))
}

type State = BTreeSet<(NodeId, NodeId)>;

/// One basic flooding step on a state given as directed `(from, to)` sends.
fn basic_successor(graph: &Graph, state: &State) -> State {
    let mut senders: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &(from, to) in state {
        senders.entry(to).or_default().insert(from);
    }
    let mut next = State::new();
    for (x, from) in senders {
        for &z in graph.neighbours(x) {
            if !from.contains(&z) {
                next.insert((x, z));
            }
        }
    }
    next
}

/// Reverse-flooding duality: reading a finished basic run backwards, with
/// every send inverted, is itself a flooding run in which the forward
/// sinks (nodes that received from all neighbours) act as initiators.
pub fn check_reverse_duality(graph: &Graph, trace: &Trace) -> Result<CheckReport, AnalysisError> {
    let info = trace.info;
    if info.rule != RuleKind::Basic || !info.synchronous || !info.static_graph {
        return not_applicable("stated for basic synchronous flooding on a static graph");
    }
    if !info.terminated {
        return not_applicable("run did not terminate");
    }
    let last = trace.last_round();
    let forward: Vec<State> = (0..=last)
        .map(|i| {
            trace
                .round(i)
                .map(|r| r.delivered.iter().map(|d| (d.from, d.to)).collect())
                .unwrap_or_default()
        })
        .collect();
    let invert = |s: &State| -> State { s.iter().map(|&(a, b)| (b, a)).collect() };
    let sinks = |i: usize| -> BTreeSet<NodeId> {
        let mut from: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for &(a, b) in &forward[i] {
            from.entry(b).or_default().insert(a);
        }
        from.into_iter()
            .filter(|(v, s)| graph.degree(*v) > 0 && s.len() == graph.degree(*v))
            .map(|(v, _)| v)
            .collect()
    };

    let mut previous = State::new();
    for i in (1..=last as usize).rev() {
        let initiators = sinks(i);
        if let Some(&v) = initiators.iter().find(|&&v| previous.iter().any(|&(_, to)| to == v)) {
            let violation = Violation::new("reverse-duality", "reverse initiator receives in the same round")
                .at_node(v)
                .at_round(i as u32);
            return Ok(CheckReport::from_result("reverse-duality", Err(violation)));
        }
        let mut expected = basic_successor(graph, &previous);
        for &v in &initiators {
            expected.extend(graph.neighbours(v).iter().map(|&u| (v, u)));
        }
        let actual = invert(&forward[i]);
        if expected != actual {
            let diff = expected.symmetric_difference(&actual).next().copied().expect("sets differ");
            let violation = Violation::new("reverse-duality", format!("reversed send {diff:?} does not follow"))
                .at_node(diff.0)
                .at_round(i as u32);
            return Ok(CheckReport::from_result("reverse-duality", Err(violation)));
        }
        previous = actual;
    }
    let tail = basic_successor(graph, &previous);
    let result = match tail.first() {
        None => Ok(()),
        Some(&(a, _)) => Err(Violation::new("reverse-duality", "reversed run continues past its end").at_node(a)),
    };
    Ok(CheckReport::from_result("reverse-duality", result))
}

/// The first round in which some node receives from all of its neighbours.
pub fn first_sink_round(graph: &Graph, trace: &Trace) -> Option<u32> {
    trace.rounds.iter().skip(1).find_map(|state| {
        let sink = state.round_set.iter().any(|&v| {
            graph.degree(v) > 0 && state.senders_to(v, None).len() == graph.degree(v)
        });
        sink.then_some(state.round)
    })
}

/// Every check that applies to `outcome`, in a fixed order. Checks that do
/// not apply are reported as such.
pub fn verify(instance: &Instance, outcome: &RunOutcome) -> Vec<CheckReport> {
    let trace = &outcome.trace;
    let graph = &instance.graph;
    let remove_only = instance.mutations.is_monotone_removal();
    let mut reports = Vec::new();

    let terminates = match (&outcome.verdict, instance.rule.kind()) {
        (_, RuleKind::Unranked) => CheckReport::from_error(
            "terminates",
            AnalysisError::NotApplicable("no termination guarantee for unranked full-send".into()),
        ),
        (_, _) if !instance.delays.is_synchronous() => {
            CheckReport::from_error("terminates", AnalysisError::NotApplicable("no termination guarantee under delays".into()))
        }
        (_, _) if !remove_only => CheckReport::from_error(
            "terminates",
            AnalysisError::NotApplicable("no termination guarantee when edges or nodes are added".into()),
        ),
        (verdict, _) => CheckReport::from_result(
            "terminates",
            if verdict.is_terminated() {
                Ok(())
            } else {
                Err(Violation::new("terminates", verdict.summary()))
            },
        ),
    };
    reports.push(terminates);

    reports.push(
        check_receive_counts(trace, &instance.schedule, remove_only)
            .unwrap_or_else(|e| CheckReport::from_error("receipt-bound", e)),
    );

    let round_zero: Vec<NodeId> = instance.schedule.at_round(0).map(|e| e.node).collect();
    let sources = SourceSet::new(graph, round_zero).ok();
    let with_sources = |name: &'static str, f: &dyn Fn(&SourceSet) -> Result<CheckReport, AnalysisError>| match &sources {
        Some(s) => f(s).unwrap_or_else(|e| CheckReport::from_error(name, e)),
        None => CheckReport::from_error(name, AnalysisError::NotApplicable("no round-0 sources".into())),
    };
    reports.push(with_sources("termination-bounds", &|s| {
        check_bounds(graph, s, trace).map(|b| {
            let result = if b.passed { Ok(()) } else { Err(Violation::new("termination-bounds", b.reason)) };
            CheckReport::from_result("termination-bounds", result)
        })
    }));
    reports.push(with_sources("ec-receipt-equivalence", &|s| check_ec_equivalences(graph, s, trace)));
    reports.push(with_sources("second-visit-offsets", &|s| check_second_visit_offsets(graph, s, trace)));
    reports.push(with_sources("equidistant-second-visit", &|s| check_equidistant_second_visit(graph, s, trace)));
    reports.push(
        check_broadcast_delivery(graph, trace, &instance.schedule)
            .unwrap_or_else(|e| CheckReport::from_error("broadcast-delivery", e)),
    );
    reports.push(check_reverse_duality(graph, trace).unwrap_or_else(|e| CheckReport::from_error("reverse-duality", e)));
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Instance;
    use crate::protocol::{ForwardingRule, Initiation};

    fn run_basic(g: &Graph, sources: &[NodeId]) -> Trace {
        Instance::basic(g.clone(), sources.iter().copied()).run(None).unwrap().trace
    }

    fn all_counts(trace: &Trace) -> BTreeSet<u32> {
        receive_counts(trace).values().copied().collect()
    }

    #[test]
    fn cycle_receipt_counts() {
        assert_eq!(all_counts(&run_basic(&Graph::cycle(6), &[0])), BTreeSet::from([1]));
        assert_eq!(all_counts(&run_basic(&Graph::cycle(5), &[0])), BTreeSet::from([2]));
        assert_eq!(receive_counts(&run_basic(&Graph::cycle(5), &[0])).len(), 5);
    }

    #[test]
    fn c4_bounds() {
        let g = Graph::cycle(4);
        let s = SourceSet::single(&g, 0).unwrap();
        let b = check_bounds(&g, &s, &run_basic(&g, &[0])).unwrap();
        assert!(b.ec_bipartite && b.passed);
        assert_eq!((b.last_round, b.e_i), (2, 2));
    }

    #[test]
    fn k3_bounds() {
        let g = Graph::complete(3);
        let s = SourceSet::single(&g, 0).unwrap();
        let b = check_bounds(&g, &s, &run_basic(&g, &[0])).unwrap();
        assert_eq!(b.last_round, 3);
        assert_eq!(b.upper_bound, Some(3));
        assert!(b.passed);
    }

    #[test]
    fn c4_adjacent_sources() {
        let g = Graph::cycle(4);
        let s = SourceSet::new(&g, [0, 1]).unwrap();
        let b = check_bounds(&g, &s, &run_basic(&g, &[0, 1])).unwrap();
        assert!(b.bipartite && !b.ec_bipartite);
        assert!(b.e_i < b.last_round && b.last_round <= b.upper_bound.unwrap());
        assert!(b.passed, "{b:?}");
    }

    #[test]
    fn ec_equivalences_on_cycles() {
        for n in [5, 6] {
            let g = Graph::cycle(n);
            let s = SourceSet::single(&g, 0).unwrap();
            assert!(check_ec_equivalences(&g, &s, &run_basic(&g, &[0])).unwrap().passed());
        }
    }

    #[test]
    fn offsets_and_equidistance() {
        let c5 = Graph::cycle(5);
        let s = SourceSet::single(&c5, 0).unwrap();
        let t = run_basic(&c5, &[0]);
        assert!(check_second_visit_offsets(&c5, &s, &t).unwrap().passed());
        assert!(check_equidistant_second_visit(&c5, &s, &t).unwrap().passed());

        let k3 = Graph::complete(3);
        let t = run_basic(&k3, &[0]);
        let occ = Occurrences::from_trace(&t, 3);
        assert_eq!(occ.second[1], Some(2));
        assert_eq!(occ.second[2], Some(2));
        assert!(check_equidistant_second_visit(&k3, &SourceSet::single(&k3, 0).unwrap(), &t).unwrap().passed());

        // adjacent sources get their second receipt in round 1
        let e = Graph::path(2);
        let t = run_basic(&e, &[0, 1]);
        let occ = Occurrences::from_trace(&t, 2);
        assert_eq!(occ.second, [Some(1), Some(1)]);
        assert!(check_equidistant_second_visit(&e, &SourceSet::new(&e, [0, 1]).unwrap(), &t).unwrap().passed());
    }

    #[test]
    fn checks_detect_tampering() {
        let g = Graph::cycle(5);
        let s = SourceSet::single(&g, 0).unwrap();
        let mut t = run_basic(&g, &[0]);
        // drop node 2 from its second round set
        let r = t.rounds.iter_mut().find(|r| r.round == 3).unwrap();
        r.round_set.retain(|&v| v != 2);
        assert!(check_ec_equivalences(&g, &s, &t).unwrap().failed());
        assert!(check_second_visit_offsets(&g, &s, &t).unwrap().failed());
    }

    #[test]
    fn bounds_reject_other_variants() {
        let g = Graph::cycle(5);
        let s = SourceSet::single(&g, 0).unwrap();
        let t = Instance::basic(g.clone(), [0])
            .with_rule(ForwardingRule::RankedFullSend)
            .run(None)
            .unwrap()
            .trace;
        assert!(check_bounds(&g, &s, &t).is_err());
        // wrong source set
        let t = run_basic(&g, &[1]);
        assert!(check_bounds(&g, &s, &t).is_err());
    }

    #[test]
    fn message_round_sets_single_message_match_plain_round_sets() {
        let g = Graph::cycle(5);
        let inst = Instance::basic(g, [0]).with_rule(ForwardingRule::RankedFullSend);
        let t = inst.run(None).unwrap().trace;
        let sets = message_round_sets(&t, &inst.schedule).unwrap();
        let plain: BTreeMap<u32, BTreeSet<NodeId>> = t
            .rounds
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| (r.round, r.round_set.iter().copied().collect()))
            .collect();
        assert_eq!(sets[&MessageId(0)], plain);
    }

    #[test]
    fn later_message_counts_toward_earlier_round_sets() {
        // path 0-1-2-3: M0 from 0 in round 0, M1 from 3 in round 1
        let schedule = InitiationSchedule::new(vec![
            Initiation { node: 0, message: MessageId(0), round: 0 },
            Initiation { node: 3, message: MessageId(1), round: 1 },
        ])
        .unwrap();
        let inst = Instance::basic(Graph::path(4), [])
            .with_schedule(schedule.clone())
            .with_rule(ForwardingRule::RankedFullSend);
        let t = inst.run(None).unwrap().trace;
        let sets = message_round_sets(&t, &schedule).unwrap();
        // round 2: node 2 receives M1 from 3 (and M0 from 1)
        assert!(sets[&MessageId(0)][&2].contains(&2));
        assert!(sets[&MessageId(1)][&1].contains(&3));
        assert!(!sets[&MessageId(1)].contains_key(&0));
    }

    #[test]
    fn broadcast_stream_on_c5() {
        let schedule = InitiationSchedule::new(
            (0..4).map(|h| Initiation { node: 0, message: MessageId(h), round: 2 * h }).collect(),
        )
        .unwrap();
        let inst = Instance::basic(Graph::cycle(5), [])
            .with_schedule(schedule.clone())
            .with_rule(ForwardingRule::RankedFullSend);
        let out = inst.run(None).unwrap();
        assert!(out.verdict.is_terminated());
        assert!(check_broadcast_delivery(&inst.graph, &out.trace, &schedule).unwrap().passed());
    }

    #[test]
    fn broadcast_needs_one_broadcaster() {
        let schedule = InitiationSchedule::new(vec![
            Initiation { node: 0, message: MessageId(0), round: 0 },
            Initiation { node: 2, message: MessageId(1), round: 1 },
        ])
        .unwrap();
        let inst = Instance::basic(Graph::cycle(5), [])
            .with_schedule(schedule.clone())
            .with_rule(ForwardingRule::RankedFullSend);
        let out = inst.run(None).unwrap();
        assert!(check_broadcast_delivery(&inst.graph, &out.trace, &schedule).is_err());
    }

    #[test]
    fn duality_on_small_graphs() {
        for g in [Graph::cycle(6), Graph::complete(3), Graph::path(2), Graph::cycle(5), Graph::complete(5)] {
            let t = run_basic(&g, &[0]);
            let r = check_reverse_duality(&g, &t).unwrap();
            assert!(r.passed(), "{g} {r:?}");
        }
    }

    #[test]
    fn duality_detects_a_forged_send() {
        let g = Graph::cycle(6);
        let mut t = run_basic(&g, &[0]);
        t.rounds[2].delivered.pop();
        assert!(check_reverse_duality(&g, &t).unwrap().failed());
    }

    #[test]
    fn sink_rounds() {
        // triangle: nodes 1 and 2 receive from both neighbours in round 2? no:
        // round 2 node 1 receives only from 2. Round 3 node 0 hears both.
        let g = Graph::complete(3);
        assert_eq!(first_sink_round(&g, &run_basic(&g, &[0])), Some(3));
        let g = Graph::path(2);
        assert_eq!(first_sink_round(&g, &run_basic(&g, &[0])), Some(1));
    }
}
