//! Deterministic multi-party simulation: message bus, scenario runner,
//! transcript recording and omniscient verification.

pub mod bus;
pub mod scenario;
pub mod transcript;
pub mod verify;

pub use bus::{Bus, Delivery, Destination, Envelope};
pub use scenario::{
    parse_scenario, run_scenario, validate_script, IkaVariant, MemberSpec, PairSpec,
    ScenarioEvent,
};
pub use transcript::{
    Direction, OraclePair, OracleRecord, Payload, Receiver, Transcript, TranscriptRecord,
};
pub use verify::{verify_transcript, CheckResult, Report};

use crate::protocol::ProtocolError;
use thiserror::Error;

/// Errors raised by scenario parsing, routing, execution and verification.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario validation: {0}")]
    Script(String),

    #[error("event {index} ({kind}): {source}")]
    Event {
        index: usize,
        kind: String,
        source: ProtocolError,
    },

    #[error("routing: {0}")]
    Routing(String),

    #[error("transcript line {line}: {msg}")]
    TranscriptParse { line: usize, msg: String },

    #[error("transcript not verifiable: {0}")]
    Unverifiable(String),

    #[error("attack demo: {0}")]
    Attack(String),

    #[error("invariant violation at event {index}, epoch {epoch}: {detail}\n{dump}")]
    InvariantViolation {
        index: usize,
        epoch: u64,
        detail: String,
        dump: String,
    },
}
