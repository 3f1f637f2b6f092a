use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::NodeId;
use crate::protocol::{Initiation, MessageId};

/// A message in flight, with its arrival given relative to the round the
/// configuration was taken after (`due >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PendingDelivery {
    pub due: u32,
    pub from: NodeId,
    pub to: NodeId,
    pub message: MessageId,
}

/// Complete simulator state between two rounds. Relative arrival times make
/// it independent of the absolute round number, so a repeated
/// configuration (once all schedules are exhausted) certifies an infinite
/// run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub pending: Vec<PendingDelivery>,
    pub upcoming_initiations: Vec<Initiation>,
    pub graph_version: usize,
    pub adversary_phase: Option<u32>,
}

impl Configuration {
    pub fn is_empty(&self) -> bool {
        self.pending.is_empty() && self.upcoming_initiations.is_empty()
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        h.update((self.pending.len() as u64).to_le_bytes());
        for p in &self.pending {
            h.update(p.due.to_le_bytes());
            h.update((p.from as u64).to_le_bytes());
            h.update((p.to as u64).to_le_bytes());
            h.update(p.message.0.to_le_bytes());
        }
        h.update((self.upcoming_initiations.len() as u64).to_le_bytes());
        for i in &self.upcoming_initiations {
            h.update(i.round.to_le_bytes());
            h.update((i.node as u64).to_le_bytes());
            h.update(i.message.0.to_le_bytes());
        }
        h.update((self.graph_version as u64).to_le_bytes());
        match self.adversary_phase {
            None => h.update([0u8]),
            Some(p) => {
                h.update([1u8]);
                h.update(p.to_le_bytes());
            }
        }
        Fingerprint(h.finalize().into())
    }
}

/// SHA-256 of a configuration's canonical byte encoding.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    /// Fingerprint of the empty configuration (nothing in flight, nothing
    /// scheduled, no mutations applied, no adversary phase).
    pub fn terminal() -> Self {
        Configuration::default().fingerprint()
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", &self.to_hex()[..16])
    }
}
