//! Scenario files: one JSON document describing a complete run in terms of
//! node and message labels.
//!
//! ```json
//! {
//!   "graph": { "edgeList": "a b\nb c\nc a" },
//!   "variant": "basic",
//!   "initiations": [{ "node": "b", "message": "M", "round": 0 }],
//!   "delay": { "model": "scripted", "period": 2,
//!              "holds": [{ "sendRound": 1, "from": "c", "to": "a", "message": "M", "hold": 1 }] },
//!   "mutations": [{ "round": 2, "op": "add-edge", "u": "b", "v": "c" }],
//!   "selector": { "default": "lowest", "perNode": { "a": "highest" } },
//!   "budget": 100
//! }
//! ```
//!
//! Message ids (and so ranks) follow the order in which message labels
//! first appear in `initiations`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Mutation, MutationSchedule, ScheduledMutation};
use crate::engine::{EngineError, Instance};
use crate::graph::{parse_edge_list, Edge, Graph, NodeId, ParsedGraph};
use crate::protocol::{
    ForwardingRule, Initiation, InitiationSchedule, MessageId, Pick, ProtocolError, RuleKind, Selector,
};
use crate::report::Labels;
use crate::timing::{DelayModel, HoldKey, ScriptedDelays};

/// A validation failure, located by a JSON field path such as
/// `initiations[1].node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub path: String,
    pub reason: String,
}

impl ScenarioError {
    fn new(path: impl Into<String>, reason: impl fmt::Display) -> Self {
        ScenarioError { path: path.into(), reason: reason.to_string() }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            f.write_str(&self.reason)
        } else {
            write!(f, "{}: {}", self.path, self.reason)
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitiationSpec {
    pub node: String,
    pub message: String,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HoldSpec {
    pub send_round: u32,
    pub from: String,
    pub to: String,
    pub message: String,
    pub hold: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelaySpec {
    Synchronous,
    /// Transit times taken from the weighted edge list.
    FixedWeights,
    Scripted {
        #[serde(default)]
        holds: Vec<HoldSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationOp {
    RemoveEdge,
    RemoveNode,
    AddEdge,
    AddNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationSpec {
    pub round: u32,
    pub op: MutationOp,
    pub u: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SelectorSpec {
    #[serde(default)]
    pub default: Pick,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_node: BTreeMap<String, Pick>,
}

fn basic() -> RuleKind {
    RuleKind::Basic
}

/// The on-disk form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphSpec,
    /// Labels that take the first node ids, in order. Labels missing from
    /// the edge list become isolated nodes (e.g. ones that join later via
    /// `add-node`); the rest are numbered by first appearance in the list.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
    #[serde(default = "basic")]
    pub variant: RuleKind,
    pub initiations: Vec<InitiationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelaySpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mutations: Vec<MutationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink_round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u32>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub instance: Instance,
    pub labels: Labels,
    pub budget: Option<u32>,
}

impl Scenario {
    /// Parses and validates scenario JSON. A relative `graph.file` is
    /// resolved against `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de)
            .map_err(|e| ScenarioError::new(e.path().to_string(), e.inner()))?;
        Scenario::from_file(&file, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::new("", format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_json(&text, path.parent())
    }

    pub fn from_file(file: &ScenarioFile, base_dir: Option<&Path>) -> Result<Self, ScenarioError> {
        Builder::default().build(file, base_dir)
    }

    /// The self-contained file form: the graph is written inline.
    pub fn to_file(&self) -> ScenarioFile {
        let inst = &self.instance;
        let labels = &self.labels;
        let node = |v: NodeId| labels.node(v).to_string();
        let msg = |m: MessageId| labels.message(m);

        let weights = match &inst.delays {
            DelayModel::FixedWeights(w) => Some(w),
            _ => None,
        };
        let mut edge_list = String::new();
        for e in inst.graph.edges() {
            edge_list.push_str(&format!("{} {}", node(e.lo()), node(e.hi())));
            if let Some(w) = weights {
                edge_list.push_str(&format!(" {}", w[&e]));
            }
            edge_list.push('\n');
        }
        // the edge list alone numbers nodes by first appearance; spell the
        // order out whenever that would not reproduce it
        let mut seen = Vec::new();
        for e in inst.graph.edges() {
            for v in [e.lo(), e.hi()] {
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
        let nodes = if seen.iter().copied().eq(inst.graph.nodes()) {
            Vec::new()
        } else {
            inst.graph.nodes().map(node).collect()
        };

        // ids are recovered from first appearance, so list by message first
        let mut entries = inst.schedule.entries().to_vec();
        entries.sort_by_key(|e| (e.message, e.round, e.node));
        let initiations = entries
            .iter()
            .map(|e| InitiationSpec { node: node(e.node), message: msg(e.message), round: e.round })
            .collect();

        let delay = match &inst.delays {
            DelayModel::Synchronous => None,
            DelayModel::FixedWeights(_) => Some(DelaySpec::FixedWeights),
            DelayModel::Scripted(s) => Some(DelaySpec::Scripted {
                holds: s
                    .holds()
                    .iter()
                    .map(|(k, &hold)| HoldSpec {
                        send_round: k.send_round,
                        from: node(k.from),
                        to: node(k.to),
                        message: msg(k.message),
                        hold,
                    })
                    .collect(),
                period: s.period(),
            }),
        };

        let mutations = inst
            .mutations
            .entries()
            .iter()
            .map(|m| {
                let (op, u, v) = match m.mutation {
                    Mutation::RemoveEdge(u, v) => (MutationOp::RemoveEdge, u, Some(v)),
                    Mutation::AddEdge(u, v) => (MutationOp::AddEdge, u, Some(v)),
                    Mutation::RemoveNode(u) => (MutationOp::RemoveNode, u, None),
                    Mutation::AddNode(u) => (MutationOp::AddNode, u, None),
                };
                MutationSpec { round: m.round, op, u: node(u), v: v.map(node) }
            })
            .collect();

        let (selector, sink_round) = match &inst.rule {
            ForwardingRule::PartialSend(s) | ForwardingRule::UnrankedFullSend(s) => (
                Some(SelectorSpec {
                    default: s.default,
                    per_node: s.per_node.iter().map(|(&v, &p)| (node(v), p)).collect(),
                }),
                None,
            ),
            ForwardingRule::SinkReversal { sink_round } => (None, Some(*sink_round)),
            _ => (None, None),
        };

        ScenarioFile {
            graph: GraphSpec { edge_list: Some(edge_list), file: None },
            nodes,
            variant: inst.rule.kind(),
            initiations,
            delay,
            mutations,
            selector,
            sink_round,
            budget: self.budget,
        }
    }

    /// Canonical pretty-printed JSON of [`Scenario::to_file`].
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self.to_file()).expect("serializable");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    /// Wraps an instance, naming messages `M0, M1, ...`.
    pub fn from_instance(instance: Instance, budget: Option<u32>) -> Self {
        let messages = instance.schedule.messages();
        let count = messages.last().map_or(0, |m| m.0 as usize + 1);
        let labels = Labels::from_graph(&instance.graph)
            .with_messages((0..count).map(|h| MessageId(h as u32).to_string()).collect());
        Scenario { instance, labels, budget }
    }
}

#[derive(Default)]
struct Builder {
    messages: HashMap<String, MessageId>,
    message_labels: Vec<String>,
}

impl Builder {
    fn build(mut self, file: &ScenarioFile, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
        let (graph, weights) = load_graph(&file.graph, base_dir)?;
        let (graph, weights) = number_nodes(graph, weights, &file.nodes)?;
        let node = |path: String, label: &str| {
            graph
                .node_by_label(label)
                .ok_or_else(|| ScenarioError::new(path, format!("unknown node {label:?}")))
        };

        let mut entries = Vec::new();
        for (i, init) in file.initiations.iter().enumerate() {
            let v = node(format!("initiations[{i}].node"), &init.node)?;
            let message = self.intern_message(&init.message);
            entries.push(Initiation { node: v, message, round: init.round });
        }
        let schedule = InitiationSchedule::new(entries).map_err(|e| ScenarioError::new("initiations", e))?;

        let rule = match file.variant {
            RuleKind::Basic => ForwardingRule::Basic,
            RuleKind::Ranked => ForwardingRule::RankedFullSend,
            RuleKind::Partial | RuleKind::Unranked => {
                let spec = file.selector.clone().unwrap_or_default();
                let mut selector = Selector { default: spec.default, per_node: BTreeMap::new() };
                for (label, pick) in &spec.per_node {
                    let v = node(format!("selector.perNode.{label}"), label)?;
                    selector.per_node.insert(v, *pick);
                }
                if file.variant == RuleKind::Partial {
                    ForwardingRule::PartialSend(selector)
                } else {
                    ForwardingRule::UnrankedFullSend(selector)
                }
            }
            RuleKind::SinkReversal => {
                let sink_round = file
                    .sink_round
                    .ok_or_else(|| ScenarioError::new("sinkRound", "required for variant sink-reversal"))?;
                ForwardingRule::SinkReversal { sink_round }
            }
        };
        if file.selector.is_some() && !matches!(file.variant, RuleKind::Partial | RuleKind::Unranked) {
            return Err(ScenarioError::new("selector", format!("not used by variant {}", file.variant)));
        }
        if file.sink_round.is_some() && file.variant != RuleKind::SinkReversal {
            return Err(ScenarioError::new("sinkRound", format!("not used by variant {}", file.variant)));
        }

        let delay_spec = file.delay.clone().unwrap_or(if weights.is_some() {
            DelaySpec::FixedWeights
        } else {
            DelaySpec::Synchronous
        });
        let delays = match delay_spec {
            DelaySpec::Synchronous => DelayModel::Synchronous,
            DelaySpec::FixedWeights => DelayModel::FixedWeights(
                weights
                    .clone()
                    .ok_or_else(|| ScenarioError::new("delay.model", "fixed-weights needs a weighted edge list"))?,
            ),
            DelaySpec::Scripted { holds, period } => {
                let mut map = BTreeMap::new();
                for (i, h) in holds.iter().enumerate() {
                    let path = |field: &str| format!("delay.holds[{i}].{field}");
                    let from = node(path("from"), &h.from)?;
                    let to = node(path("to"), &h.to)?;
                    let message = *self
                        .messages
                        .get(&h.message)
                        .ok_or_else(|| ScenarioError::new(path("message"), format!("unknown message {:?}", h.message)))?;
                    map.insert(HoldKey { send_round: h.send_round, from, to, message }, h.hold);
                }
                DelayModel::Scripted(ScriptedDelays::new(map, period).map_err(|e| ScenarioError::new("delay", e))?)
            }
        };

        let mut mutations = Vec::new();
        for (i, m) in file.mutations.iter().enumerate() {
            let path = |field: &str| format!("mutations[{i}].{field}");
            let u = node(path("u"), &m.u)?;
            let second = || -> Result<NodeId, ScenarioError> {
                let label = m.v.as_deref().ok_or_else(|| ScenarioError::new(path("v"), "required for edge operations"))?;
                node(path("v"), label)
            };
            let mutation = match m.op {
                MutationOp::RemoveEdge => Mutation::RemoveEdge(u, second()?),
                MutationOp::AddEdge => Mutation::AddEdge(u, second()?),
                MutationOp::RemoveNode | MutationOp::AddNode if m.v.is_some() => {
                    return Err(ScenarioError::new(path("v"), "not used by node operations"));
                }
                MutationOp::RemoveNode => Mutation::RemoveNode(u),
                MutationOp::AddNode => Mutation::AddNode(u),
            };
            mutations.push(ScheduledMutation { round: m.round, mutation });
        }
        let mutations = MutationSchedule::new(mutations).map_err(|e| ScenarioError::new("mutations", e))?;

        if file.budget == Some(0) {
            return Err(ScenarioError::new("budget", "must be at least 1"));
        }

        let labels = Labels::from_graph(&graph).with_messages(self.message_labels);
        let instance = Instance { graph, schedule, rule, delays, mutations };
        instance.simulation().map_err(|e| engine_error(&labels, e))?;
        Ok(Scenario { instance, labels, budget: file.budget })
    }

    fn intern_message(&mut self, label: &str) -> MessageId {
        if let Some(&id) = self.messages.get(label) {
            return id;
        }
        let id = MessageId(self.message_labels.len() as u32);
        self.messages.insert(label.to_string(), id);
        self.message_labels.push(label.to_string());
        id
    }
}

fn engine_error(labels: &Labels, err: EngineError) -> ScenarioError {
    match err {
        EngineError::Protocol(ProtocolError::RankOrder { earlier, earlier_round, later, later_round }) => {
            ScenarioError::new(
                "initiations",
                format!(
                    "ranked full-send needs rank order: {} (round {earlier_round}) ranks below {} (round {later_round})",
                    labels.message(earlier),
                    labels.message(later)
                ),
            )
        }
        EngineError::Protocol(e) => ScenarioError::new("initiations", e),
        EngineError::TooManyMessages(..) => ScenarioError::new("initiations", err),
        EngineError::Timing(e) => ScenarioError::new("delay", e),
        EngineError::Mutation(e) => ScenarioError::new("mutations", e),
        other => ScenarioError::new("", other),
    }
}

/// Renumbers nodes so that `first` takes ids `0, 1, ...`.
fn number_nodes(
    graph: Graph,
    weights: Option<BTreeMap<Edge, u32>>,
    first: &[String],
) -> Result<(Graph, Option<BTreeMap<Edge, u32>>), ScenarioError> {
    if first.is_empty() {
        return Ok((graph, weights));
    }
    let mut order: Vec<String> = Vec::new();
    for (i, label) in first.iter().enumerate() {
        if order.contains(label) {
            return Err(ScenarioError::new(format!("nodes[{i}]"), format!("duplicate node {label:?}")));
        }
        order.push(label.clone());
    }
    for label in graph.labels() {
        if !order.contains(label) {
            order.push(label.clone());
        }
    }
    let id: Vec<NodeId> = graph
        .labels()
        .iter()
        .map(|l| order.iter().position(|o| o == l).expect("every label is ordered"))
        .collect();
    let mut renumbered = Graph::empty(order.len()).with_labels(order);
    for e in graph.edges() {
        renumbered.add_edge(id[e.lo()], id[e.hi()]).expect("renumbering keeps edges simple");
    }
    let weights = weights.map(|w| w.into_iter().map(|(e, w)| (Edge::new(id[e.lo()], id[e.hi()]), w)).collect());
    Ok((renumbered, weights))
}

fn load_graph(spec: &GraphSpec, base_dir: Option<&Path>) -> Result<(Graph, Option<BTreeMap<Edge, u32>>), ScenarioError> {
    let (text, path) = match (&spec.edge_list, &spec.file) {
        (Some(text), None) => (text.clone(), "graph.edgeList"),
        (None, Some(file)) => {
            let full = match base_dir {
                Some(dir) if file.is_relative() => dir.join(file),
                _ => file.clone(),
            };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| ScenarioError::new("graph.file", format!("cannot read {}: {e}", full.display())))?;
            (text, "graph.file")
        }
        _ => return Err(ScenarioError::new("graph", "give exactly one of edgeList and file")),
    };
    let parsed = parse_edge_list(&text).map_err(|e| ScenarioError::new(path, e))?;
    Ok(match parsed {
        ParsedGraph::Unweighted(g) => (g, None),
        weighted => weighted.into_parts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::triangle_adversary_scenario;

    const C6: &str = r#"{
        "graph": { "edgeList": "0 1\n1 2\n2 3\n3 4\n4 5\n5 0" },
        "initiations": [{ "node": "0", "message": "M", "round": 0 }]
    }"#;

    #[test]
    fn minimal_scenario_runs() {
        let s = Scenario::from_json(C6, None).unwrap();
        let out = s.instance.run(s.budget).unwrap();
        assert!(out.verdict.is_terminated());
        assert_eq!(out.trace.last_round(), 3);
        assert_eq!(s.labels.message(MessageId(0)), "M");
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = C6.replace(r#""node": "0""#, r#""node": "q""#);
        let err = Scenario::from_json(&bad, None).unwrap_err();
        assert_eq!(err.path, "initiations[0].node");

        let bad = C6.replace(r#""round": 0"#, r#""round": -1"#);
        let err = Scenario::from_json(&bad, None).unwrap_err();
        assert_eq!(err.path, "initiations[0].round");

        let bad = C6.replace("\"initiations\"", "\"variant\": \"flood\", \"initiations\"");
        assert_eq!(Scenario::from_json(&bad, None).unwrap_err().path, "variant");

        let bad = C6.replace("5 0", "5 5");
        assert_eq!(Scenario::from_json(&bad, None).unwrap_err().path, "graph.edgeList");
    }

    #[test]
    fn ranked_order_is_validated() {
        let text = r#"{
            "graph": { "edgeList": "a b\nb c" },
            "variant": "ranked",
            "initiations": [
                { "node": "a", "message": "low", "round": 3 },
                { "node": "c", "message": "high", "round": 1 }
            ]
        }"#;
        let err = Scenario::from_json(text, None).unwrap_err();
        assert_eq!(err.path, "initiations");
        assert!(err.reason.contains("rank order"), "{err}");
    }

    #[test]
    fn variant_fields_are_checked() {
        let text = C6.replace("\"initiations\"", "\"sinkRound\": 2, \"initiations\"");
        assert_eq!(Scenario::from_json(&text, None).unwrap_err().path, "sinkRound");
        let text = C6.replace("\"initiations\"", "\"variant\": \"sink-reversal\", \"initiations\"");
        assert_eq!(Scenario::from_json(&text, None).unwrap_err().path, "sinkRound");
    }

    #[test]
    fn weighted_graph_defaults_to_fixed_weights() {
        let text = r#"{ "graph": { "edgeList": "a b 2\nb c 1" },
                        "initiations": [{ "node": "a", "message": "M", "round": 0 }] }"#;
        let s = Scenario::from_json(text, None).unwrap();
        assert!(matches!(s.instance.delays, DelayModel::FixedWeights(_)));
        assert_eq!(s.instance.run(None).unwrap().trace.last_round(), 3);
    }

    #[test]
    fn triangle_adversary_round_trips() {
        let (graph, schedule, delays) = triangle_adversary_scenario();
        let inst = Instance::basic(graph, []).with_schedule(schedule).with_delays(delays);
        let s = Scenario::from_instance(inst, Some(50));
        let text = s.to_json();
        let back = Scenario::from_json(&text, None).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
        assert!(back.instance.run(back.budget).unwrap().verdict.is_non_terminating());
    }

    #[test]
    fn mutations_and_late_nodes() {
        let text = r#"{
            "graph": { "edgeList": "a b" },
            "nodes": ["c"],
            "initiations": [{ "node": "a", "message": "M", "round": 0 }],
            "mutations": [
                { "round": 1, "op": "add-node", "u": "c" },
                { "round": 2, "op": "add-edge", "u": "b", "v": "c" }
            ]
        }"#;
        let s = Scenario::from_json(text, None).unwrap();
        assert_eq!(s.instance.mutations.len(), 2);
        let back = Scenario::from_json(&s.to_json(), None).unwrap();
        assert_eq!(back.instance, s.instance);

        let bad = text.replace(r#""u": "b", "v": "c""#, r#""u": "b""#);
        assert_eq!(Scenario::from_json(&bad, None).unwrap_err().path, "mutations[1].v");
    }

    #[test]
    fn node_numbering_survives_a_round_trip() {
        // path 0-2-1: edge order alone would number 2 before 1
        let g = Graph::from_edges(4, [(0, 2), (2, 1)]).unwrap();
        let s = Scenario::from_instance(Instance::basic(g, [1]), None);
        let back = Scenario::from_json(&s.to_json(), None).unwrap();
        assert_eq!(back.instance, s.instance);
        assert_eq!(back.instance.run(None).unwrap().fingerprints, s.instance.run(None).unwrap().fingerprints);
    }

    #[test]
    fn graph_file_is_resolved_relative_to_the_scenario() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::write(dir.join("g.txt"), "x y\ny z\n").unwrap();
        let path = dir.join("s.json");
        std::fs::write(&path, r#"{ "graph": { "file": "g.txt" },
            "initiations": [{ "node": "x", "message": "M", "round": 0 }] }"#)
        .unwrap();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.instance.graph.node_count(), 3);
    }
}
