//! Privacy-preserving computation network in a deterministic simulator.
//!
//! Secret-shared MPC (Shamir for honest-majority work, SPDZ-style
//! authenticated shares for dishonest-majority correctness) with a simulated
//! ledger as public bulletin board, predicate-gated DHT storage, and
//! deposit/fee accounting.

pub mod circuits;
pub mod crypto;
pub mod dht;
pub mod field;
pub mod identity;
pub mod incentives;
pub mod ledger;
pub mod mpc;
pub mod net;
pub mod spdz;
pub mod sss;

pub use field::{Fe, Field};
