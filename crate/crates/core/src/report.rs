//! JSON output. Objects are built as `serde_json::Value`, whose maps keep
//! keys sorted, so every document has one canonical byte form.

use serde::Serialize;
use serde_json::{json, Value};

use crate::engine::{Fingerprint, RoundState, RunOutcome, Trace, Verdict};
use crate::graph::{Graph, NodeId};
use crate::protocol::MessageId;

/// External names for nodes and messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub nodes: Vec<String>,
    pub messages: Vec<String>,
}

impl Labels {
    /// Node labels from the graph; messages named `M0, M1, ...`.
    pub fn from_graph(graph: &Graph) -> Self {
        Labels { nodes: graph.labels().to_vec(), messages: Vec::new() }
    }

    pub fn with_messages(mut self, messages: Vec<String>) -> Self {
        self.messages = messages;
        self
    }

    pub fn node(&self, v: NodeId) -> &str {
        &self.nodes[v]
    }

    pub fn message(&self, m: MessageId) -> String {
        self.messages.get(m.0 as usize).cloned().unwrap_or_else(|| m.to_string())
    }
}

/// Serializes any value with sorted keys and no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("serializable");
    serde_json::to_string(&value).expect("value serializes")
}

/// One trace line: `{round, delivered, roundSet}` with label-sorted arrays.
pub fn round_json(labels: &Labels, state: &RoundState, fingerprint: Option<&Fingerprint>) -> Value {
    let mut delivered: Vec<[String; 3]> = state
        .delivered
        .iter()
        .map(|d| [labels.node(d.from).to_string(), labels.node(d.to).to_string(), labels.message(d.message)])
        .collect();
    delivered.sort();
    let mut round_set: Vec<&str> = state.round_set.iter().map(|&v| labels.node(v)).collect();
    round_set.sort_unstable();
    let mut out = json!({
        "round": state.round,
        "delivered": delivered,
        "roundSet": round_set,
    });
    if !state.initiated.is_empty() {
        let mut initiated: Vec<[String; 2]> = state
            .initiated
            .iter()
            .map(|&(v, m)| [labels.node(v).to_string(), labels.message(m)])
            .collect();
        initiated.sort();
        out["initiated"] = json!(initiated);
    }
    if let Some(fp) = fingerprint {
        out["fingerprint"] = json!(fp.to_hex());
    }
    out
}

/// The whole trace, one JSON object per line, each line ending in `\n`.
pub fn trace_jsonl(labels: &Labels, trace: &Trace, fingerprints: &[Fingerprint]) -> String {
    let mut out = String::new();
    for (i, state) in trace.rounds.iter().enumerate() {
        out.push_str(&round_json(labels, state, fingerprints.get(i)).to_string());
        out.push('\n');
    }
    out
}

pub fn verdict_json(verdict: &Verdict) -> Value {
    match verdict {
        Verdict::Terminated { last_round } => json!({ "verdict": "terminated", "lastRound": last_round }),
        Verdict::NonTerminating { cycle_start, period, certificate } => json!({
            "verdict": "non-terminating",
            "cycleStart": cycle_start,
            "period": period,
            "certificate": certificate.fingerprint().to_hex(),
        }),
        Verdict::BudgetExhausted { budget } => json!({ "verdict": "budget-exhausted", "budget": budget }),
    }
}

/// Trace lines followed by the verdict line.
pub fn outcome_jsonl(labels: &Labels, outcome: &RunOutcome) -> String {
    let mut out = trace_jsonl(labels, &outcome.trace, &outcome.fingerprints);
    out.push_str(&verdict_json(&outcome.verdict).to_string());
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Instance;

    #[test]
    fn round_lines_use_labels_and_sorted_keys() {
        let g = Graph::path(2).with_labels(vec!["x".into(), "a".into()]);
        let out = Instance::basic(g.clone(), [0]).run(None).unwrap();
        let labels = Labels::from_graph(&g);
        let text = trace_jsonl(&labels, &out.trace, &[]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"delivered":[],"initiated":[["x","M0"]],"round":0,"roundSet":["x"]}"#);
        assert_eq!(lines[1], r#"{"delivered":[["x","a","M0"]],"round":1,"roundSet":["a"]}"#);
    }

    #[test]
    fn verdict_objects() {
        assert_eq!(
            verdict_json(&Verdict::Terminated { last_round: 3 }).to_string(),
            r#"{"lastRound":3,"verdict":"terminated"}"#
        );
        let v = verdict_json(&Verdict::BudgetExhausted { budget: 9 });
        assert_eq!(v["verdict"], "budget-exhausted");
    }

    #[test]
    fn message_labels_fall_back_to_ids() {
        let labels = Labels::from_graph(&Graph::path(1)).with_messages(vec!["hello".into()]);
        assert_eq!(labels.message(MessageId(0)), "hello");
        assert_eq!(labels.message(MessageId(3)), "M3");
    }
}
