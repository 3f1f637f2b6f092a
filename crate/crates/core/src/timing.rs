//! Delivery-time models. Under the synchronous model a message sent in
//! round `r` is received in round `r`; the other models only ever delay it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, NodeId, WeightedGraph};
use crate::protocol::{Initiation, InitiationSchedule, MessageId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimingError {
    #[error("no transit weight for edge {0} {1}")]
    MissingWeight(NodeId, NodeId),
    #[error("transit weight must be at least 1 (edge {0} {1})")]
    ZeroWeight(NodeId, NodeId),
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("hold keyed on send round {round} lies outside period {period}")]
    HoldOutsidePeriod { round: u32, period: u32 },
}

/// Key of one adversarial hold: the send that is delayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HoldKey {
    pub send_round: u32,
    pub from: NodeId,
    pub to: NodeId,
    pub message: MessageId,
}

/// Scripted adversary: extra ticks per send, zero unless listed. With a
/// period `p`, a send in round `r` is looked up under `r mod p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ScriptedDelays {
    holds: BTreeMap<HoldKey, u32>,
    period: Option<u32>,
}

impl ScriptedDelays {
    pub fn new(holds: BTreeMap<HoldKey, u32>, period: Option<u32>) -> Result<Self, TimingError> {
        if let Some(p) = period {
            if p == 0 {
                return Err(TimingError::ZeroPeriod);
            }
            if let Some(k) = holds.keys().find(|k| k.send_round >= p) {
                return Err(TimingError::HoldOutsidePeriod { round: k.send_round, period: p });
            }
        }
        Ok(ScriptedDelays { holds, period })
    }

    pub fn hold(&self, send_round: u32, from: NodeId, to: NodeId, message: MessageId) -> u32 {
        let send_round = self.period.map_or(send_round, |p| send_round % p);
        self.holds.get(&HoldKey { send_round, from, to, message }).copied().unwrap_or(0)
    }

    pub fn holds(&self) -> &BTreeMap<HoldKey, u32> {
        &self.holds
    }

    pub fn period(&self) -> Option<u32> {
        self.period
    }

    pub fn total_hold(&self) -> u64 {
        self.holds.values().map(|&h| u64::from(h)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum DelayModel {
    #[default]
    Synchronous,
    /// Per-edge transit time `w >= 1`, the same in both directions; a send
    /// in round `r` arrives in round `r + w - 1`.
    FixedWeights(BTreeMap<Edge, u32>),
    Scripted(ScriptedDelays),
}

impl DelayModel {
    pub fn fixed(weighted: &WeightedGraph) -> Self {
        DelayModel::FixedWeights(weighted.weights().clone())
    }

    pub fn is_synchronous(&self) -> bool {
        match self {
            DelayModel::Synchronous => true,
            DelayModel::FixedWeights(w) => w.values().all(|&w| w == 1),
            DelayModel::Scripted(s) => s.holds.values().all(|&h| h == 0),
        }
    }

    /// Adversary phase for state fingerprints; `None` unless periodic.
    pub fn phase(&self, round: u32) -> Option<u32> {
        match self {
            DelayModel::Scripted(ScriptedDelays { period: Some(p), .. }) => Some(round % p),
            _ => None,
        }
    }

    /// True once the model treats every later send round alike (up to phase).
    pub fn is_steady_after(&self, round: u32) -> bool {
        match self {
            DelayModel::Scripted(s) if s.period.is_none() => {
                s.holds.keys().all(|k| k.send_round <= round)
            }
            _ => true,
        }
    }

    /// Extra rounds the model can add in total; used for default budgets.
    pub fn total_delay(&self) -> u64 {
        match self {
            DelayModel::Synchronous => 0,
            DelayModel::FixedWeights(w) => w.values().map(|&w| u64::from(w)).sum(),
            DelayModel::Scripted(s) => s.total_hold(),
        }
    }

    pub fn validate(&self, graph: &Graph) -> Result<(), TimingError> {
        if let DelayModel::FixedWeights(weights) = self {
            for e in graph.edges() {
                match weights.get(&e) {
                    None => return Err(TimingError::MissingWeight(e.lo(), e.hi())),
                    Some(0) => return Err(TimingError::ZeroWeight(e.lo(), e.hi())),
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

/// A message on its way along a directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InTransit {
    pub delivery_round: u32,
    pub from: NodeId,
    pub to: NodeId,
    pub message: MessageId,
}

/// Round in which a message sent along `from -> to` in `send_round` arrives.
pub fn delivery_round(
    model: &DelayModel,
    send_round: u32,
    from: NodeId,
    to: NodeId,
    message: MessageId,
) -> Result<u32, TimingError> {
    match model {
        DelayModel::Synchronous => Ok(send_round),
        DelayModel::FixedWeights(weights) => match weights.get(&Edge::new(from, to)) {
            None => Err(TimingError::MissingWeight(from, to)),
            Some(0) => Err(TimingError::ZeroWeight(from, to)),
            Some(&w) => Ok(send_round + w - 1),
        },
        DelayModel::Scripted(s) => Ok(send_round + s.hold(send_round, from, to, message)),
    }
}

/// Triangle `a, b, c` in which `b` floods in round 0 and the adversary makes
/// `c` hold every message it sends in an odd round for one extra round.
/// The exchange between two nodes in round 2 reappears in round 4 with
/// `a` and `b` swapped and in round 6 exactly, so flooding never stops.
pub fn triangle_adversary_scenario() -> (Graph, InitiationSchedule, DelayModel) {
    let graph = Graph::complete(3).with_labels(vec!["a".into(), "b".into(), "c".into()]);
    let (a, b, c) = (0, 1, 2);
    let schedule = InitiationSchedule::new(vec![Initiation {
        node: b,
        message: MessageId(0),
        round: 0,
    }])
    .expect("single initiation");
    let holds = [a, b]
        .into_iter()
        .map(|to| (HoldKey { send_round: 1, from: c, to, message: MessageId(0) }, 1))
        .collect();
    let delays = ScriptedDelays::new(holds, Some(2)).expect("holds fit the period");
    (graph, schedule, DelayModel::Scripted(delays))
}
