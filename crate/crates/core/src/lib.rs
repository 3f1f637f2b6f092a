//! Simulation and verification of amnesiac flooding: stateless broadcast
//! where a node forwards a message based only on what it received in the
//! previous round.
//!
//! The crate is organized bottom-up: [`graph`] holds the static graph
//! quantities, [`protocol`] the forwarding rules, [`timing`] and
//! [`dynamics`] the delivery-time and graph-mutation models, [`engine`] the
//! round driver with termination and non-termination detection,
//! [`analysis`] the post-hoc checks over traces, [`search`] the exhaustive
//! and randomized instance searches, and [`scenario`] the JSON scenario
//! format shared by the command line and the browser demo.

pub mod analysis;
pub mod dynamics;
pub mod engine;
pub mod graph;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod search;
pub mod timing;

pub use engine::{Instance, RunOutcome, Trace, Verdict};
pub use graph::{Graph, NodeId, SourceSet};
pub use protocol::{ForwardingRule, MessageId};
