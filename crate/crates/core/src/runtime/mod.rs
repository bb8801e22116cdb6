//! Party scheduling, message transport and transcripts.
//!
//! A [`Session`] drives all `N` parties through synchronous rounds. Each
//! party owns its randomness; everything that crosses between parties is a
//! [`Message`] handed to a [`Transport`]. Every send is appended to the
//! session transcript in a fixed order, so a seed fully determines the
//! transcript regardless of which transport carried it.

mod session;
mod tcp;
mod transcript;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use session::{run_in_memory, run_session, PartyState, Session, SessionOptions, SessionResult, TestHooks};
pub use tcp::TcpTransport;
pub use transcript::{
    replay, replay_lines, ConfigRecord, Divergence, Record, ReplayReport, RevealEvent, SummaryRecord,
    Transcript,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("party {0} cannot send to itself")]
    SelfSend(usize),
    #[error("unknown party {0}")]
    UnknownParty(usize),
    #[error("timed out waiting for round {round} at party {party}")]
    Timeout { round: u64, party: usize },
    #[error("party {0} disconnected")]
    Disconnected(usize),
    #[error("malformed frame: {0}")]
    Frame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One point-to-point transmission. A broadcast is `N - 1` of these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub session_id: Arc<str>,
    pub round: u64,
    pub step: Arc<str>,
    pub from: usize,
    pub to: usize,
    #[serde(with = "decimal_vec")]
    pub payload: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Mem,
    Tcp,
}

/// Moves one round of messages between parties.
///
/// Contract: every message reaches exactly its `to` party, once; messages
/// on the same `(from, to)` link keep their send order; the call returns
/// only after the whole round has been delivered (round barrier).
pub trait Transport: Send {
    fn kind(&self) -> TransportKind;

    fn parties(&self) -> usize;

    /// Returns each party's inbox (`inboxes[p - 1]`), sorted by sender.
    fn deliver(&mut self, round: u64, outgoing: Vec<Message>) -> Result<Vec<Vec<Message>>, TransportError>;
}

pub(crate) fn check_route(n: usize, m: &Message) -> Result<(), TransportError> {
    if m.from == m.to {
        return Err(TransportError::SelfSend(m.from));
    }
    for p in [m.from, m.to] {
        if p == 0 || p > n {
            return Err(TransportError::UnknownParty(p));
        }
    }
    Ok(())
}

/// Deterministic in-process delivery.
#[derive(Debug)]
pub struct InMemoryTransport {
    n: usize,
}

impl InMemoryTransport {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Transport for InMemoryTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::Mem
    }

    fn parties(&self) -> usize {
        self.n
    }

    fn deliver(&mut self, _round: u64, outgoing: Vec<Message>) -> Result<Vec<Vec<Message>>, TransportError> {
        let mut inboxes: Vec<Vec<Message>> = vec![Vec::new(); self.n];
        for m in outgoing {
            check_route(self.n, &m)?;
            inboxes[m.to - 1].push(m);
        }
        // stable: keeps per-link send order
        for inbox in &mut inboxes {
            inbox.sort_by_key(|m| m.from);
        }
        Ok(inboxes)
    }
}

/// Multiplication invocations per protocol step. Only ever grows.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationCounter {
    counts: BTreeMap<String, u64>,
}

impl InvocationCounter {
    pub(crate) fn record(&mut self, step: &str, k: u64) {
        if k > 0 {
            *self.counts.entry(step.to_owned()).or_insert(0) += k;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Total over steps whose label contains `needle`.
    pub fn matching(&self, needle: &str) -> u64 {
        self.counts
            .iter()
            .filter(|(k, _)| k.contains(needle))
            .map(|(_, v)| v)
            .sum()
    }

    /// Invocations spent verifying that the comparison mask is nonzero.
    pub fn mask_verification(&self) -> u64 {
        self.matching("/verify/")
    }

    /// Total minus mask verification: the figure the published bounds count.
    pub fn core(&self) -> u64 {
        self.total() - self.mask_verification()
    }

    pub fn by_step(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }
}

pub(crate) mod decimal_vec {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<u64>().map_err(D::Error::custom))
            .collect()
    }
}

pub(crate) mod decimal {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(D::Error::custom)
    }
}
