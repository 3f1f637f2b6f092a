//! Forwarding rules: what a node sends in round `i + 1` given only what it
//! received in round `i` (or the fact that it initiates a flooding).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

/// Message identity; the numeric value doubles as the message's rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId(pub u32);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("node {node} initiates in round {round} while receiving a message")]
    InitiatedWhileReceiving { node: NodeId, round: u32 },
    #[error("node {node} received several messages in round {round} under a single-message rule")]
    MultipleMessages { node: NodeId, round: u32 },
    #[error("node {node} initiates twice in round {round}")]
    DuplicateInitiation { node: NodeId, round: u32 },
    #[error("messages out of rank order: {earlier} initiated in round {earlier_round} after {later} in round {later_round}")]
    RankOrder {
        earlier: MessageId,
        earlier_round: u32,
        later: MessageId,
        later_round: u32,
    },
    #[error("message {0} is flooded more than once; ranked full-send needs one flooding per message")]
    RepeatedMessage(MessageId),
}

/// One flooding: `node` sends `message` to all neighbours in round `round + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Initiation {
    pub node: NodeId,
    pub message: MessageId,
    pub round: u32,
}

/// Initiations sorted by `(round, node)`; `(node, round)` pairs are unique.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct InitiationSchedule {
    entries: Vec<Initiation>,
}

impl InitiationSchedule {
    pub fn new(mut entries: Vec<Initiation>) -> Result<Self, ProtocolError> {
        entries.sort_by_key(|e| (e.round, e.node, e.message));
        for pair in entries.windows(2) {
            if pair[0].round == pair[1].round && pair[0].node == pair[1].node {
                return Err(ProtocolError::DuplicateInitiation {
                    node: pair[0].node,
                    round: pair[0].round,
                });
            }
        }
        Ok(InitiationSchedule { entries })
    }

    /// Every node in `sources` floods message 0 in round 0.
    pub fn single_round<I: IntoIterator<Item = NodeId>>(sources: I) -> Self {
        let entries = sources
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|node| Initiation { node, message: MessageId(0), round: 0 })
            .collect();
        InitiationSchedule { entries }
    }

    pub fn entries(&self) -> &[Initiation] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_round(&self) -> Option<u32> {
        self.entries.last().map(|e| e.round)
    }

    pub fn at_round(&self, round: u32) -> impl Iterator<Item = &Initiation> {
        let start = self.entries.partition_point(|e| e.round < round);
        self.entries[start..].iter().take_while(move |e| e.round == round)
    }

    pub fn messages(&self) -> BTreeSet<MessageId> {
        self.entries.iter().map(|e| e.message).collect()
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        self.entries.iter().map(|e| e.node).collect()
    }

    /// Ranked full-send precondition: one flooding per message and
    /// `h1 <= h2` implies `round(h1) <= round(h2)`.
    pub fn check_rank_order(&self) -> Result<(), ProtocolError> {
        let mut by_message: BTreeMap<MessageId, u32> = BTreeMap::new();
        for e in &self.entries {
            if by_message.insert(e.message, e.round).is_some() {
                return Err(ProtocolError::RepeatedMessage(e.message));
            }
        }
        let ordered: Vec<(MessageId, u32)> = by_message.into_iter().collect();
        for pair in ordered.windows(2) {
            let ((lo, lo_round), (hi, hi_round)) = (pair[0], pair[1]);
            if lo_round > hi_round {
                return Err(ProtocolError::RankOrder {
                    earlier: lo,
                    earlier_round: lo_round,
                    later: hi,
                    later_round: hi_round,
                });
            }
        }
        Ok(())
    }
}

/// Which of several received messages to forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pick {
    Lowest,
    Highest,
}

/// Deterministic message choice for the partial-send and unranked full-send
/// rules: a default pick, overridable per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Selector {
    pub default: Pick,
    pub per_node: BTreeMap<NodeId, Pick>,
}

impl Default for Pick {
    fn default() -> Self {
        Pick::Lowest
    }
}

impl Selector {
    pub fn lowest() -> Self {
        Selector::default()
    }

    pub fn with_override(mut self, node: NodeId, pick: Pick) -> Self {
        self.per_node.insert(node, pick);
        self
    }

    pub fn pick_for(&self, node: NodeId) -> Pick {
        self.per_node.get(&node).copied().unwrap_or(self.default)
    }

    /// Chooses among the message ids received by `node`. `candidates` must
    /// be non-empty.
    pub fn choose(&self, node: NodeId, candidates: &BTreeSet<MessageId>) -> MessageId {
        let pick = match self.pick_for(node) {
            Pick::Lowest => candidates.first(),
            Pick::Highest => candidates.last(),
        };
        *pick.expect("selector called with no candidates")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ForwardingRule {
    /// Single message: forward to every neighbour it did not arrive from.
    Basic,
    /// Forward one chosen message to neighbours that sent nothing at all.
    PartialSend(Selector),
    /// Forward the highest-ranked message to neighbours that did not send it.
    RankedFullSend,
    /// Forward a chosen message to neighbours that did not send it.
    UnrankedFullSend(Selector),
    /// Basic flooding, except that a node receiving from all of its
    /// neighbours in `sink_round` sends to all of them in the next round.
    SinkReversal { sink_round: u32 },
}

/// Variant tag without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Basic,
    Partial,
    Ranked,
    Unranked,
    SinkReversal,
}

impl ForwardingRule {
    pub fn kind(&self) -> RuleKind {
        match self {
            ForwardingRule::Basic => RuleKind::Basic,
            ForwardingRule::PartialSend(_) => RuleKind::Partial,
            ForwardingRule::RankedFullSend => RuleKind::Ranked,
            ForwardingRule::UnrankedFullSend(_) => RuleKind::Unranked,
            ForwardingRule::SinkReversal { .. } => RuleKind::SinkReversal,
        }
    }

    pub fn is_single_message(&self) -> bool {
        matches!(self, ForwardingRule::Basic | ForwardingRule::SinkReversal { .. })
    }

    /// Last round in which the rule behaves differently from its steady
    /// state, if any.
    pub fn deviation_round(&self) -> Option<u32> {
        match self {
            ForwardingRule::SinkReversal { sink_round } => Some(*sink_round),
            _ => None,
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RuleKind::Basic => "basic",
            RuleKind::Partial => "partial",
            RuleKind::Ranked => "ranked",
            RuleKind::Unranked => "unranked",
            RuleKind::SinkReversal => "sink-reversal",
        };
        f.write_str(name)
    }
}

/// Messages received by one node in one round, keyed by sender.
pub type Received = BTreeMap<NodeId, BTreeSet<MessageId>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Send {
    pub to: NodeId,
    pub message: MessageId,
}

/// Sends of `node` in round `round + 1`, sorted by target.
///
/// `received` holds what `node` received in `round`; `initiating` is the
/// message it floods from `round`, if any. A node may not do both.
pub fn decide_sends(
    rule: &ForwardingRule,
    node: NodeId,
    round: u32,
    received: &Received,
    initiating: Option<MessageId>,
    neighbours: &[NodeId],
) -> Result<Vec<Send>, ProtocolError> {
    if let Some(message) = initiating {
        if !received.is_empty() {
            return Err(ProtocolError::InitiatedWhileReceiving { node, round });
        }
        return Ok(neighbours.iter().map(|&to| Send { to, message }).collect());
    }
    if received.is_empty() {
        return Ok(Vec::new());
    }

    let candidates: BTreeSet<MessageId> = received.values().flatten().copied().collect();
    let senders_of = |m: MessageId| -> BTreeSet<NodeId> {
        received.iter().filter(|(_, ms)| ms.contains(&m)).map(|(&s, _)| s).collect()
    };
    let send_to_all_but = |message: MessageId, skip: &BTreeSet<NodeId>| -> Vec<Send> {
        neighbours
            .iter()
            .filter(|to| !skip.contains(to))
            .map(|&to| Send { to, message })
            .collect()
    };

    let sends = match rule {
        ForwardingRule::Basic | ForwardingRule::SinkReversal { .. } => {
            if candidates.len() > 1 {
                return Err(ProtocolError::MultipleMessages { node, round });
            }
            let message = *candidates.first().expect("non-empty");
            let is_sink = !neighbours.is_empty()
                && neighbours.iter().all(|u| received.contains_key(u));
            match rule {
                ForwardingRule::SinkReversal { sink_round } if *sink_round == round && is_sink => {
                    send_to_all_but(message, &BTreeSet::new())
                }
                _ => send_to_all_but(message, &senders_of(message)),
            }
        }
        ForwardingRule::PartialSend(selector) => {
            let message = selector.choose(node, &candidates);
            let all_senders: BTreeSet<NodeId> = received.keys().copied().collect();
            send_to_all_but(message, &all_senders)
        }
        ForwardingRule::RankedFullSend => {
            let message = *candidates.last().expect("non-empty");
            send_to_all_but(message, &senders_of(message))
        }
        ForwardingRule::UnrankedFullSend(selector) => {
            let message = selector.choose(node, &candidates);
            send_to_all_but(message, &senders_of(message))
        }
    };
    Ok(sends)
}
