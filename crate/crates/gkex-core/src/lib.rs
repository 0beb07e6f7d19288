//! Group key exchange over a prime-order cyclic group: two-round initial
//! agreement (centralized or distributed work), single-broadcast rekeying,
//! member eviction and mass join, plus a deterministic multi-party simulator
//! and passive-adversary oracles.
//!
//! Every member holds two private-public pairs `(r, g^r)` and `(x, g^x)`.
//! The epoch controller broadcasts one keying message per epoch, and each
//! member derives the shared key from its own slot: `K = Y_i * S^x_i *
//! R^r_i`. Rekeying raises the entire previous broadcast to a fresh
//! exponent, so a single message refreshes everyone.
//!
//! # This is not a hardened cryptographic library
//!
//! Arithmetic is variable-time big-integer math, keys are raw group
//! elements, and there is no authentication of any participant. The crate
//! exists to execute and check the protocol logic — agreement, eviction and
//! join behavior, and what a passive adversary can or cannot compute — not
//! to protect production traffic.
//!
//! The `parallel` feature (on by default) runs the per-member inner loops on
//! a rayon pool; disabling it yields an identical sequential build.

pub mod adversary;
pub mod group;
pub mod protocol;
pub mod sim;

pub(crate) mod par;

pub use group::{Element, GroupError, GroupParams, GroupSpec, Preset, Scalar};
pub use protocol::{
    JoinPetition, KeyPair, KeyingMessage, MemberId, MemberPublicKeys, MemberState,
    ProtocolError, Role, Variant,
};
pub use sim::SimError;
