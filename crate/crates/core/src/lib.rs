//! SCOPE: COPE opportunistic network coding hardened with an additively
//! homomorphic elliptic-curve cipher and ECDSA packet authentication.
//!
//! The crate is organized around the protocol stack:
//!
//! - [`group`] — GF(2^m) fields, the NIST binary curves, and the
//!   message-to-point codec.
//! - [`he`] — additively homomorphic EC-ElGamal, including layered
//!   (multi-key) and deterministic per-flow encryption.
//! - [`auth`] — ECDSA over P-384/P-521 plus the per-field contact and
//!   source signature procedures.
//! - [`packet`] — the COPE header and the SCOPE / robust SCOPE packet
//!   formats with bit-exact serialization.
//! - [`coding`] — coding-condition evaluation (plain and on encryptions),
//!   payload coding and decoding.
//! - [`sim`] — a deterministic round-based broadcast simulator with
//!   adversary instrumentation.

pub mod auth;
pub mod coding;
pub mod group;
pub mod he;
pub mod packet;
pub mod sim;

use serde::{Deserialize, Serialize};

/// Network node identifier.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "N{}", self.0)
    }
}
