//! Information-theoretically secure N-party comparison on top of Shamir
//! secret sharing.
//!
//! Secrets are encoded as *partition* and *0-coded* vectors of their bit
//! prefixes ([`encoding`]), shared among `N >= 2T + 1` semi-honest parties
//! ([`sharing`]), and compared with BGW-style multiplications ([`mpc`]).
//! The gates in [`protocols`] compose into max, min, median, rank,
//! sealed-bid auctions, outlier distances and maximin without revealing
//! intermediate results. [`runtime`] drives the parties over an in-memory
//! or TCP transport and records replayable transcripts; [`audit`] checks
//! secrecy empirically and accounts multiplication invocations.

pub mod audit;
pub mod encoding;
pub mod field;
pub mod mpc;
pub mod par;
pub mod protocols;
pub mod runtime;
pub mod sharing;

use thiserror::Error;

pub use encoding::{EncodingError, EncodingMode};
pub use field::{FieldConfig, FieldElement, FieldError};
pub use par::Execution;
pub use protocols::{Outcome, ProtocolSpec};
pub use runtime::{run_session, Session, SessionOptions, Transcript};
pub use sharing::{ConfigError, ProtocolConfig, Share, ShareVector, Shared, SharedVector};

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sharing(#[from] sharing::SharingError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("transport: {0}")]
    Transport(#[from] runtime::TransportError),
    #[error("sharing of degree {degree} cannot enter a multiplication (max {max})")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("{0} needs at least one input")]
    EmptyInput(&'static str),
    #[error("operand lengths differ")]
    LengthMismatch,
    #[error("random nonzero secret not found after {0} attempts")]
    RetryExhausted(u32),
    #[error("no candidate matched the requested rank (inputs must be distinct)")]
    NoCandidate,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parties disagree: {0}")]
    Inconsistent(String),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("audit: {0}")]
    Audit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
