//! Line-delimited JSON transcripts.
//!
//! Line 1 is the config record; then one record per message in send
//! order; then the reveal events; last, a summary with invocation counts
//! and the parties' outputs. Field elements are decimal strings.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::session::{run_in_memory, SessionOptions, TestHooks};
use super::{decimal, decimal_vec, InvocationCounter, Message};
use crate::protocols::{Outcome, ProtocolSpec};
use crate::sharing::ProtocolConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub session_id: String,
    pub n: usize,
    pub t: usize,
    #[serde(with = "decimal")]
    pub q: u64,
    pub bits: u32,
    #[serde(with = "decimal_vec")]
    pub alphas: Vec<u64>,
    pub seed: u64,
    pub protocol: ProtocolSpec,
    #[serde(default, skip_serializing_if = "TestHooks::is_empty")]
    pub hooks: TestHooks,
}

impl ConfigRecord {
    pub fn new(cfg: &ProtocolConfig, protocol: ProtocolSpec, session_id: String, hooks: TestHooks) -> Self {
        Self {
            session_id,
            n: cfg.n,
            t: cfg.t,
            q: cfg.field.modulus(),
            bits: cfg.bits,
            alphas: cfg.alphas.iter().map(|a| a.value()).collect(),
            seed: cfg.seed,
            protocol,
            hooks,
        }
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        Ok(ProtocolConfig::new(self.n, self.t, self.q, self.bits, self.seed)?.with_alphas(self.alphas.clone())?)
    }
}

/// A value opened to `recipients`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealEvent {
    pub step: String,
    #[serde(with = "decimal_vec")]
    pub values: Vec<u64>,
    pub recipients: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub invocations: InvocationCounter,
    pub rounds: u64,
    pub messages: usize,
    pub mask_retries: u64,
    pub outputs: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Config(ConfigRecord),
    Message(Message),
    Reveal(RevealEvent),
    Summary(SummaryRecord),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub header: ConfigRecord,
    pub messages: Vec<Message>,
    pub reveals: Vec<RevealEvent>,
    pub invocations: InvocationCounter,
    pub rounds: u64,
    pub mask_retries: u64,
    pub outputs: Vec<Outcome>,
}

impl Transcript {
    pub fn records(&self) -> Vec<Record> {
        let mut out = Vec::with_capacity(self.messages.len() + self.reveals.len() + 2);
        out.push(Record::Config(self.header.clone()));
        out.extend(self.messages.iter().cloned().map(Record::Message));
        out.extend(self.reveals.iter().cloned().map(Record::Reveal));
        out.push(Record::Summary(SummaryRecord {
            invocations: self.invocations.clone(),
            rounds: self.rounds,
            messages: self.messages.len(),
            mask_retries: self.mask_retries,
            outputs: self.outputs.clone(),
        }));
        out
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"))
            .collect()
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
        for line in self.to_lines() {
            writeln!(f, "{line}").map_err(io_err)?;
        }
        f.flush().map_err(io_err)
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S]) -> Result<Self> {
        let records = parse_records(lines)?;
        let mut it = records.into_iter();
        let header = match it.next() {
            Some((_, Record::Config(c))) => c,
            _ => return Err(Error::Transcript("line 1 must be a config record".into())),
        };
        let mut t = Transcript {
            header,
            messages: Vec::new(),
            reveals: Vec::new(),
            invocations: InvocationCounter::default(),
            rounds: 0,
            mask_retries: 0,
            outputs: Vec::new(),
        };
        let mut summary_seen = false;
        for (line, r) in it {
            if summary_seen {
                return Err(Error::Transcript(format!("line {line}: record after summary")));
            }
            match r {
                Record::Config(_) => return Err(Error::Transcript(format!("line {line}: second config record"))),
                Record::Message(m) => t.messages.push(m),
                Record::Reveal(e) => t.reveals.push(e),
                Record::Summary(s) => {
                    t.invocations = s.invocations;
                    t.rounds = s.rounds;
                    t.mask_retries = s.mask_retries;
                    t.outputs = s.outputs;
                    summary_seen = true;
                }
            }
        }
        Ok(t)
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_lines(&read_lines(path)?)
    }

    /// What party `p` observes: messages addressed to it plus its own sends.
    pub fn party_view(&self, p: usize) -> Vec<&Message> {
        self.messages.iter().filter(|m| m.to == p || m.from == p).collect()
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Transcript(e.to_string())
}

fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(io_err)?;
    BufReader::new(f)
        .lines()
        .map(|l| l.map_err(io_err))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .collect()
}

fn parse_records<S: AsRef<str>>(lines: &[S]) -> Result<Vec<(usize, Record)>> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<Record>(l.as_ref())
                .map(|r| (i + 1, r))
                .map_err(|e| Error::Transcript(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    /// 1-based line number in the transcript file.
    pub line: usize,
    pub expected: Option<String>,
    pub actual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayReport {
    pub identical: bool,
    pub lines_compared: usize,
    pub first_divergence: Option<Divergence>,
    pub outputs: Vec<Outcome>,
}

impl ReplayReport {
    pub fn verdict(&self) -> &'static str {
        if self.identical {
            "identical"
        } else {
            "divergent"
        }
    }
}

/// Re-executes the session described by the header over the in-memory
/// transport and compares record by record.
pub fn replay_lines<S: AsRef<str>>(lines: &[S]) -> Result<ReplayReport> {
    let recorded = parse_records(lines)?;
    let header = match recorded.first() {
        Some((_, Record::Config(c))) => c.clone(),
        _ => return Err(Error::Transcript("line 1 must be a config record".into())),
    };
    let cfg = header.protocol_config()?;
    let options = SessionOptions {
        hooks: header.hooks.clone(),
        session_id: Some(header.session_id.clone()),
        ..SessionOptions::sequential()
    };
    let rerun = run_in_memory(&header.protocol, &cfg, options)?;
    let fresh: Vec<String> = rerun.transcript.to_lines();
    let old: Vec<String> = recorded
        .iter()
        .map(|(_, r)| serde_json::to_string(r).expect("records serialize"))
        .collect();

    let mut first_divergence = None;
    for i in 0..old.len().max(fresh.len()) {
        if old.get(i) != fresh.get(i) {
            first_divergence = Some(Divergence {
                line: i + 1,
                expected: fresh.get(i).cloned(),
                actual: old.get(i).cloned(),
            });
            break;
        }
    }
    Ok(ReplayReport {
        identical: first_divergence.is_none(),
        lines_compared: old.len().min(fresh.len()),
        first_divergence,
        outputs: rerun.outputs,
    })
}

pub fn replay(path: impl AsRef<Path>) -> Result<ReplayReport> {
    replay_lines(&read_lines(path)?)
}
