//! Time-indexed graph mutations. Mutations scheduled for round `r` take
//! effect at the start of round `r`, before any delivery of that round.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mutation {
    RemoveEdge(NodeId, NodeId),
    RemoveNode(NodeId),
    AddEdge(NodeId, NodeId),
    AddNode(NodeId),
}

impl Mutation {
    pub fn is_removal(&self) -> bool {
        matches!(self, Mutation::RemoveEdge(..) | Mutation::RemoveNode(_))
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::RemoveEdge(u, v) => write!(f, "remove-edge {u} {v}"),
            Mutation::RemoveNode(v) => write!(f, "remove-node {v}"),
            Mutation::AddEdge(u, v) => write!(f, "add-edge {u} {v}"),
            Mutation::AddNode(v) => write!(f, "add-node {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("round {round}: cannot apply {mutation}: {reason}")]
pub struct MutationError {
    pub round: u32,
    pub mutation: Mutation,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScheduledMutation {
    pub round: u32,
    pub mutation: Mutation,
}

/// Mutations in round order; entries of the same round keep their order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MutationSchedule {
    entries: Vec<ScheduledMutation>,
}

impl MutationSchedule {
    pub fn new(mut entries: Vec<ScheduledMutation>) -> Result<Self, MutationError> {
        if let Some(bad) = entries.iter().find(|e| e.round == 0) {
            return Err(MutationError {
                round: 0,
                mutation: bad.mutation,
                reason: "mutations start at round 1".into(),
            });
        }
        entries.sort_by_key(|e| e.round);
        Ok(MutationSchedule { entries })
    }

    pub fn empty() -> Self {
        MutationSchedule::default()
    }

    pub fn entries(&self) -> &[ScheduledMutation] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn last_round(&self) -> Option<u32> {
        self.entries.last().map(|e| e.round)
    }

    /// Only removals.
    pub fn is_monotone_removal(&self) -> bool {
        self.entries.iter().all(|e| e.mutation.is_removal())
    }

    /// Nodes that are absent at the start: the first mutation naming them is
    /// an `AddNode`.
    pub fn initially_absent(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut absent = BTreeSet::new();
        for e in &self.entries {
            let nodes: &[NodeId] = match &e.mutation {
                Mutation::RemoveEdge(u, v) | Mutation::AddEdge(u, v) => &[*u, *v],
                Mutation::RemoveNode(v) => &[*v],
                Mutation::AddNode(v) => {
                    if seen.insert(*v) {
                        absent.insert(*v);
                    }
                    continue;
                }
            };
            seen.extend(nodes.iter().copied());
        }
        absent
    }
}

/// The graph in force at the current round, tracking absent nodes and how
/// many scheduled mutations have been applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DynamicGraph {
    graph: Graph,
    absent: BTreeSet<NodeId>,
    applied: usize,
}

impl DynamicGraph {
    pub fn new(graph: Graph, schedule: &MutationSchedule) -> Result<Self, MutationError> {
        let absent = schedule.initially_absent();
        for &v in &absent {
            if graph.degree(v) > 0 {
                let first = schedule
                    .entries
                    .iter()
                    .find(|e| e.mutation == Mutation::AddNode(v))
                    .expect("absent nodes come from AddNode entries");
                return Err(MutationError {
                    round: first.round,
                    mutation: first.mutation,
                    reason: "node already has edges".into(),
                });
            }
        }
        Ok(DynamicGraph { graph, absent, applied: 0 })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn is_present(&self, v: NodeId) -> bool {
        !self.absent.contains(&v)
    }

    /// Number of schedule entries applied so far.
    pub fn version(&self) -> usize {
        self.applied
    }

    pub fn is_exhausted(&self, schedule: &MutationSchedule) -> bool {
        self.applied == schedule.entries.len()
    }

    /// Applies every pending entry with `entry.round <= round`. Returns
    /// whether anything changed.
    pub fn advance_to(&mut self, schedule: &MutationSchedule, round: u32) -> Result<bool, MutationError> {
        let start = self.applied;
        while let Some(entry) = schedule.entries.get(self.applied) {
            if entry.round > round {
                break;
            }
            self.apply(entry)?;
            self.applied += 1;
        }
        Ok(self.applied > start)
    }

    fn apply(&mut self, entry: &ScheduledMutation) -> Result<(), MutationError> {
        let fail = |reason: &str| MutationError {
            round: entry.round,
            mutation: entry.mutation,
            reason: reason.to_string(),
        };
        let n = self.graph.node_count();
        let known = |v: NodeId| if v < n { Ok(()) } else { Err(fail("unknown node")) };
        match entry.mutation {
            Mutation::RemoveEdge(u, v) => {
                known(u)?;
                known(v)?;
                self.graph.remove_edge(u, v).map_err(|_| fail("edge does not exist"))
            }
            Mutation::AddEdge(u, v) => {
                known(u)?;
                known(v)?;
                if !self.is_present(u) || !self.is_present(v) {
                    return Err(fail("endpoint is not present"));
                }
                self.graph.add_edge(u, v).map_err(|e| fail(&e.to_string()))
            }
            Mutation::RemoveNode(v) => {
                known(v)?;
                if !self.absent.insert(v) {
                    return Err(fail("node is not present"));
                }
                self.graph.isolate(v).map_err(|e| fail(&e.to_string()))
            }
            Mutation::AddNode(v) => {
                known(v)?;
                if !self.absent.remove(&v) {
                    return Err(fail("node is already present"));
                }
                Ok(())
            }
        }
    }
}

/// The graph in force for `round`, i.e. after applying every mutation
/// scheduled for rounds up to and including `round`.
pub fn apply_mutations(graph: &Graph, schedule: &MutationSchedule, round: u32) -> Result<Graph, MutationError> {
    let mut dynamic = DynamicGraph::new(graph.clone(), schedule)?;
    dynamic.advance_to(schedule, round)?;
    Ok(dynamic.graph)
}
