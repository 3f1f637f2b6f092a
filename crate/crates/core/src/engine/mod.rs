//! Round driver. Each round applies scheduled mutations, delivers the
//! messages due, lets every receiving or initiating node decide its sends
//! for the next round, and records what happened. Termination is detected
//! when nothing is in flight and no initiation remains; non-termination by
//! a repeated [`Configuration`] once every schedule is exhausted.

mod config;
pub mod kernel;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

pub use config::{Configuration, Fingerprint, PendingDelivery};

use crate::dynamics::{DynamicGraph, MutationError, MutationSchedule};
use crate::graph::{Graph, NodeId};
use crate::protocol::{
    decide_sends, ForwardingRule, InitiationSchedule, MessageId, ProtocolError, Received, RuleKind,
};
use crate::timing::{delivery_round, DelayModel, InTransit, TimingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error("initiation at unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} is not present in round {round} and cannot initiate")]
    AbsentInitiator { node: NodeId, round: u32 },
    #[error("rule {0} floods a single message but the schedule uses {1}")]
    TooManyMessages(RuleKind, usize),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("certificate does not describe a steady configuration: {0}")]
    BadCertificate(&'static str),
}

/// One message receipt: `from` sent `message` and `to` received it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Delivery {
    pub from: NodeId,
    pub to: NodeId,
    pub message: MessageId,
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RoundState {
    pub round: u32,
    /// Sorted receipts of this round.
    pub delivered: Vec<Delivery>,
    /// Sorted `(node, message)` floodings initiated in this round.
    pub initiated: Vec<(NodeId, MessageId)>,
    /// Receivers and initiators of this round, sorted.
    pub round_set: Vec<NodeId>,
}

impl RoundState {
    pub fn is_empty(&self) -> bool {
        self.round_set.is_empty()
    }

    /// Senders to `node` in this round, optionally restricted to one message.
    pub fn senders_to(&self, node: NodeId, message: Option<MessageId>) -> BTreeSet<NodeId> {
        self.delivered
            .iter()
            .filter(|d| d.to == node && message.map_or(true, |m| d.message == m))
            .map(|d| d.from)
            .collect()
    }
}

/// How a trace was produced; the theorem checks use it to decide whether
/// they apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunInfo {
    pub rule: RuleKind,
    pub synchronous: bool,
    pub static_graph: bool,
    pub terminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trace {
    pub rounds: Vec<RoundState>,
    pub info: RunInfo,
}

impl Trace {
    /// Largest round with a non-empty round set (0 if there is none).
    pub fn last_round(&self) -> u32 {
        self.rounds.iter().rev().find(|r| !r.is_empty()).map_or(0, |r| r.round)
    }

    pub fn round(&self, i: u32) -> Option<&RoundState> {
        self.rounds.get(i as usize).filter(|r| r.round == i)
    }

    /// Rounds in which each node received or initiated each message.
    pub fn receipt_rounds(&self) -> BTreeMap<(NodeId, MessageId), Vec<u32>> {
        let mut out: BTreeMap<(NodeId, MessageId), Vec<u32>> = BTreeMap::new();
        for state in &self.rounds {
            let mut here: BTreeSet<(NodeId, MessageId)> =
                state.delivered.iter().map(|d| (d.to, d.message)).collect();
            here.extend(state.initiated.iter().copied());
            for key in here {
                out.entry(key).or_default().push(state.round);
            }
        }
        out
    }

    /// Round-set memberships of every node, ignoring message identity.
    pub fn node_rounds(&self, node_count: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); node_count];
        for state in &self.rounds {
            for &v in &state.round_set {
                out[v].push(state.round);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Terminated { last_round: u32 },
    NonTerminating { cycle_start: u32, period: u32, certificate: Configuration },
    BudgetExhausted { budget: u32 },
}

impl Verdict {
    pub fn is_terminated(&self) -> bool {
        matches!(self, Verdict::Terminated { .. })
    }

    pub fn is_non_terminating(&self) -> bool {
        matches!(self, Verdict::NonTerminating { .. })
    }

    /// Same kind with the same numbers; certificates compared by value.
    pub fn summary(&self) -> String {
        match self {
            Verdict::Terminated { last_round } => format!("terminated after round {last_round}"),
            Verdict::NonTerminating { cycle_start, period, .. } => {
                format!("non-terminating: configuration of round {cycle_start} recurs every {period} rounds")
            }
            Verdict::BudgetExhausted { budget } => format!("undecided after {budget} rounds"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub trace: Trace,
    /// Fingerprint of the configuration after each simulated round.
    pub fingerprints: Vec<Fingerprint>,
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub graph: Graph,
    pub schedule: InitiationSchedule,
    pub rule: ForwardingRule,
    pub delays: DelayModel,
    pub mutations: MutationSchedule,
}

impl Instance {
    /// Basic flooding from `sources`, all in round 0, on a static graph.
    pub fn basic<I: IntoIterator<Item = NodeId>>(graph: Graph, sources: I) -> Self {
        Instance {
            graph,
            schedule: InitiationSchedule::single_round(sources),
            rule: ForwardingRule::Basic,
            delays: DelayModel::Synchronous,
            mutations: MutationSchedule::empty(),
        }
    }

    pub fn with_rule(mut self, rule: ForwardingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_delays(mut self, delays: DelayModel) -> Self {
        self.delays = delays;
        self
    }

    pub fn with_mutations(mut self, mutations: MutationSchedule) -> Self {
        self.mutations = mutations;
        self
    }

    pub fn with_schedule(mut self, schedule: InitiationSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// `max(2|G| + last initiation round + total transit delay, 64)`.
    pub fn default_budget(&self) -> u32 {
        let base = 2 * self.graph.node_count() as u64
            + u64::from(self.schedule.last_round().unwrap_or(0))
            + self.delays.total_delay();
        base.max(64).min(u64::from(u32::MAX)) as u32
    }

    pub fn simulation(&self) -> Result<Simulation<'_>, EngineError> {
        Simulation::new(self)
    }

    pub fn run(&self, budget: Option<u32>) -> Result<RunOutcome, EngineError> {
        let budget = budget.unwrap_or_else(|| self.default_budget());
        if budget == 0 {
            return Err(EngineError::ZeroBudget);
        }
        let mut sim = self.simulation()?;
        let mut rounds = Vec::new();
        let mut fingerprints = Vec::new();
        let mut seen: HashMap<Fingerprint, Vec<(u32, Configuration)>> = HashMap::new();

        let verdict = loop {
            let state = sim.step()?;
            let round = state.round;
            rounds.push(state);
            let config = sim.configuration();
            let fp = config.fingerprint();
            fingerprints.push(fp);

            if sim.is_quiescent() {
                let last_round = rounds.iter().rev().find(|r| !r.is_empty()).map_or(0, |r| r.round);
                break Verdict::Terminated { last_round };
            }
            if sim.is_steady() {
                let bucket = seen.entry(fp).or_default();
                if let Some((start, _)) = bucket.iter().find(|(_, c)| *c == config) {
                    break Verdict::NonTerminating {
                        cycle_start: *start,
                        period: round - start,
                        certificate: config,
                    };
                }
                bucket.push((round, config));
            }
            if round >= budget {
                break Verdict::BudgetExhausted { budget };
            }
        };

        let info = RunInfo {
            rule: self.rule.kind(),
            synchronous: self.delays.is_synchronous(),
            static_graph: self.mutations.is_empty(),
            terminated: verdict.is_terminated(),
        };
        Ok(RunOutcome { verdict, trace: Trace { rounds, info }, fingerprints })
    }

    /// Re-simulates `period` rounds from the certificate configuration, taken
    /// after round `cycle_start`, and reports whether the same
    /// configuration comes back.
    pub fn verify_certificate(
        &self,
        cycle_start: u32,
        period: u32,
        certificate: &Configuration,
    ) -> Result<bool, EngineError> {
        if period == 0 {
            return Err(EngineError::BadCertificate("period is zero"));
        }
        let mut sim = Simulation::resume(self, cycle_start, certificate)?;
        if !sim.is_steady() {
            return Err(EngineError::BadCertificate("schedules are not exhausted"));
        }
        for _ in 0..period {
            sim.step()?;
        }
        Ok(sim.configuration() == *certificate)
    }
}

/// Runs one simulation; `budget` defaults to [`Instance::default_budget`].
pub fn run(
    graph: &Graph,
    schedule: &InitiationSchedule,
    rule: &ForwardingRule,
    model: &DelayModel,
    dynamics: &MutationSchedule,
    budget: Option<u32>,
) -> Result<RunOutcome, EngineError> {
    let instance = Instance {
        graph: graph.clone(),
        schedule: schedule.clone(),
        rule: rule.clone(),
        delays: model.clone(),
        mutations: dynamics.clone(),
    };
    instance.run(budget)
}

/// Step-by-step simulation state.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    instance: &'a Instance,
    graph: DynamicGraph,
    next_round: u32,
    pending: BTreeSet<InTransit>,
}

impl<'a> Simulation<'a> {
    pub fn new(instance: &'a Instance) -> Result<Self, EngineError> {
        let n = instance.graph.node_count();
        if let Some(&bad) = instance.schedule.nodes().iter().find(|&&v| v >= n) {
            return Err(EngineError::UnknownNode(bad));
        }
        instance.delays.validate(&instance.graph)?;
        let messages = instance.schedule.messages().len();
        if instance.rule.is_single_message() && messages > 1 {
            return Err(EngineError::TooManyMessages(instance.rule.kind(), messages));
        }
        if instance.rule == ForwardingRule::RankedFullSend {
            instance.schedule.check_rank_order()?;
        }
        let graph = DynamicGraph::new(instance.graph.clone(), &instance.mutations)?;
        Ok(Simulation { instance, graph, next_round: 0, pending: BTreeSet::new() })
    }

    fn resume(instance: &'a Instance, round: u32, config: &Configuration) -> Result<Self, EngineError> {
        let mut sim = Simulation::new(instance)?;
        if config.graph_version != instance.mutations.len() {
            return Err(EngineError::BadCertificate("mutations are not exhausted"));
        }
        if instance.delays.phase(round) != config.adversary_phase {
            return Err(EngineError::BadCertificate("adversary phase does not match the round"));
        }
        sim.graph.advance_to(&instance.mutations, u32::MAX)?;
        sim.next_round = round + 1;
        sim.pending = config
            .pending
            .iter()
            .map(|p| InTransit { delivery_round: round + p.due, from: p.from, to: p.to, message: p.message })
            .collect();
        Ok(sim)
    }

    /// Round that the next [`step`](Self::step) will simulate.
    pub fn next_round(&self) -> u32 {
        self.next_round
    }

    pub fn graph(&self) -> &Graph {
        self.graph.graph()
    }

    pub fn in_transit(&self) -> impl Iterator<Item = &InTransit> {
        self.pending.iter()
    }

    pub fn step(&mut self) -> Result<RoundState, EngineError> {
        let round = self.next_round;
        let inst = self.instance;

        if self.graph.advance_to(&inst.mutations, round)? {
            let g = self.graph.graph();
            self.pending.retain(|t| g.has_edge(t.from, t.to));
        }

        let mut inbox: BTreeMap<NodeId, Received> = BTreeMap::new();
        let mut delivered = BTreeSet::new();
        while let Some(t) = self.pending.first().copied() {
            if t.delivery_round != round {
                debug_assert!(t.delivery_round > round, "late delivery");
                break;
            }
            self.pending.pop_first();
            inbox.entry(t.to).or_default().entry(t.from).or_default().insert(t.message);
            delivered.insert(Delivery { from: t.from, to: t.to, message: t.message });
        }

        let mut initiating: BTreeMap<NodeId, MessageId> = BTreeMap::new();
        for init in inst.schedule.at_round(round) {
            if !self.graph.is_present(init.node) {
                return Err(EngineError::AbsentInitiator { node: init.node, round });
            }
            initiating.insert(init.node, init.message);
        }

        let active: BTreeSet<NodeId> = inbox.keys().chain(initiating.keys()).copied().collect();
        let empty = Received::new();
        for &v in &active {
            let received = inbox.get(&v).unwrap_or(&empty);
            let neighbours = self.graph.graph().neighbours(v);
            let sends = decide_sends(&inst.rule, v, round, received, initiating.get(&v).copied(), neighbours)?;
            for s in sends {
                let at = delivery_round(&inst.delays, round + 1, v, s.to, s.message)?;
                self.pending.insert(InTransit { delivery_round: at, from: v, to: s.to, message: s.message });
            }
        }

        self.next_round += 1;
        Ok(RoundState {
            round,
            delivered: delivered.into_iter().collect(),
            initiated: initiating.into_iter().collect(),
            round_set: active.into_iter().collect(),
        })
    }

    /// Last simulated round.
    fn current(&self) -> u32 {
        self.next_round.saturating_sub(1)
    }

    /// Nothing in flight and nothing left to initiate.
    pub fn is_quiescent(&self) -> bool {
        self.pending.is_empty()
            && self.instance.schedule.last_round().map_or(true, |r| r < self.next_round)
    }

    /// Every schedule (initiations, mutations, scripted delays, rule
    /// deviations) is exhausted or periodic, so the future depends only on
    /// the current configuration.
    pub fn is_steady(&self) -> bool {
        let inst = self.instance;
        let r = self.current();
        self.next_round > 0
            && inst.schedule.last_round().map_or(true, |last| last <= r)
            && self.graph.is_exhausted(&inst.mutations)
            && inst.delays.is_steady_after(r)
            && inst.rule.deviation_round().map_or(true, |d| d <= r)
    }

    /// Configuration after the last simulated round.
    pub fn configuration(&self) -> Configuration {
        let r = self.current();
        Configuration {
            pending: self
                .pending
                .iter()
                .map(|t| PendingDelivery { due: t.delivery_round - r, from: t.from, to: t.to, message: t.message })
                .collect(),
            upcoming_initiations: self
                .instance
                .schedule
                .entries()
                .iter()
                .filter(|e| e.round > r)
                .copied()
                .collect(),
            graph_version: self.graph.version(),
            adversary_phase: self.instance.delays.phase(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Mutation, ScheduledMutation};
    use crate::protocol::Initiation;
    use crate::timing::triangle_adversary_scenario;

    fn sets(trace: &Trace) -> Vec<Vec<NodeId>> {
        trace.rounds.iter().map(|r| r.round_set.clone()).collect()
    }

    #[test]
    fn c6_first_round() {
        let inst = Instance::basic(Graph::cycle(6), [0]);
        let mut sim = inst.simulation().unwrap();
        let r0 = sim.step().unwrap();
        assert_eq!(r0.round_set, [0]);
        assert!(r0.delivered.is_empty());
        let r1 = sim.step().unwrap();
        let m = MessageId(0);
        assert_eq!(r1.delivered, [Delivery { from: 0, to: 1, message: m }, Delivery { from: 0, to: 5, message: m }]);
    }

    #[test]
    fn triangle_round_sets() {
        let out = Instance::basic(Graph::complete(3), [0]).run(None).unwrap();
        assert_eq!(sets(&out.trace), vec![vec![0], vec![1, 2], vec![1, 2], vec![0]]);
        assert_eq!(out.verdict, Verdict::Terminated { last_round: 3 });
    }

    #[test]
    fn cycles_terminate_on_time() {
        let c6 = Instance::basic(Graph::cycle(6), [0]).run(None).unwrap();
        assert_eq!(c6.verdict, Verdict::Terminated { last_round: 3 });
        let c5 = Instance::basic(Graph::cycle(5), [0]).run(None).unwrap();
        assert_eq!(c5.verdict, Verdict::Terminated { last_round: 5 });
    }

    #[test]
    fn empty_schedule_terminates_at_zero() {
        let inst = Instance::basic(Graph::cycle(4), []);
        let out = inst.run(None).unwrap();
        assert_eq!(out.verdict, Verdict::Terminated { last_round: 0 });
        assert_eq!(out.fingerprints, [Fingerprint::terminal()]);
    }

    #[test]
    fn triangle_adversary_never_stops() {
        let (graph, schedule, delays) = triangle_adversary_scenario();
        let inst = Instance::basic(graph, []).with_schedule(schedule).with_delays(delays);
        let out = inst.run(None).unwrap();
        let Verdict::NonTerminating { cycle_start, period, certificate } = &out.verdict else {
            panic!("{:?}", out.verdict)
        };
        assert!(*period >= 1);
        assert!(inst.verify_certificate(*cycle_start, *period, certificate).unwrap());
        // a wrong period does not verify
        assert!(!inst.verify_certificate(*cycle_start, period + 1, certificate).unwrap());
    }

    #[test]
    fn triangle_without_holds_terminates() {
        let (graph, schedule, _) = triangle_adversary_scenario();
        let inst = Instance::basic(graph, []).with_schedule(schedule);
        assert_eq!(inst.run(None).unwrap().verdict, Verdict::Terminated { last_round: 3 });
    }

    #[test]
    fn removing_the_only_carrier_edge_stops_flooding() {
        // path 0-1-2: message on 1->2 in round 2, edge removed at round 2
        let s = MutationSchedule::new(vec![ScheduledMutation { round: 2, mutation: Mutation::RemoveEdge(1, 2) }]).unwrap();
        let inst = Instance::basic(Graph::path(3), [0]).with_mutations(s);
        let out = inst.run(None).unwrap();
        assert_eq!(out.verdict, Verdict::Terminated { last_round: 1 });
        assert!(out.trace.rounds.iter().skip(2).all(RoundState::is_empty));
    }

    #[test]
    fn initiating_while_receiving_surfaces() {
        let schedule = InitiationSchedule::new(vec![
            Initiation { node: 0, message: MessageId(0), round: 0 },
            Initiation { node: 1, message: MessageId(1), round: 1 },
        ])
        .unwrap();
        let inst = Instance::basic(Graph::path(3), [])
            .with_schedule(schedule)
            .with_rule(ForwardingRule::RankedFullSend);
        assert_eq!(
            inst.run(None).unwrap_err(),
            EngineError::Protocol(ProtocolError::InitiatedWhileReceiving { node: 1, round: 1 })
        );
    }

    #[test]
    fn basic_rejects_multiple_messages() {
        let schedule = InitiationSchedule::new(vec![
            Initiation { node: 0, message: MessageId(0), round: 0 },
            Initiation { node: 1, message: MessageId(1), round: 0 },
        ])
        .unwrap();
        let inst = Instance::basic(Graph::path(3), []).with_schedule(schedule);
        assert!(matches!(inst.run(None), Err(EngineError::TooManyMessages(..))));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let (graph, schedule, delays) = triangle_adversary_scenario();
        let inst = Instance::basic(graph, []).with_schedule(schedule).with_delays(delays);
        assert_eq!(inst.run(Some(3)).unwrap().verdict, Verdict::BudgetExhausted { budget: 3 });
        assert_eq!(inst.run(Some(0)).unwrap_err(), EngineError::ZeroBudget);
    }
}
