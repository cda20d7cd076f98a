//! The computation network: committees of deposit-holding nodes evaluate
//! circuits over secret-shared inputs, with the ledger as bulletin board
//! and the DHT as storage for share pointers.

mod committee;
mod network;
mod scenario;
mod trace;

pub use committee::{
    committee_threshold, committee_weight, hierarchical_mul, measure_mul, metrics_table, reduce_parties,
    reduced_committee, select_committee, CommitteeTree, MetricsRow,
};
pub use network::{ComputeOutcome, Network, NetworkConfig, ShareRef, SimNode};
pub use scenario::{run_scenario, RunReport, ScenarioConfig, ScenarioError};
pub use trace::{ComputationTrace, FaultRecord, NodeTally, Outcome, Status, TraceError};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuits::CircuitError;
use crate::identity::IdentityError;
use crate::ledger::LedgerError;
use crate::net::NetError;
use crate::spdz::SpdzError;
use crate::sss::SssError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MpcError {
    #[error("need {need} eligible nodes, have {have}")]
    InsufficientNodes { need: usize, have: usize },
    #[error("threshold {t} needs more than {} parties, have {n}", 2 * t)]
    HonestMajorityViolated { t: usize, n: usize },
    #[error("committee tree needs c >= 2 and at least c parties (n = {n}, c = {c})")]
    InvalidTree { n: usize, c: usize },
    #[error("{parties} parties is below the quorum of {quorum}")]
    BelowQuorum { parties: usize, quorum: usize },
    #[error("permission denied")]
    Denied,
    #[error("share pointer is malformed or from an earlier committee")]
    StaleShares,
    #[error("node {node} rejected its input share: commitment mismatch")]
    BadInputShare { node: usize },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Sss(#[from] SssError),
    #[error(transparent)]
    Spdz(#[from] SpdzError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Honest majority, degree reduction by re-sharing.
    Shamir,
    /// Dishonest majority, MAC-authenticated additive shares.
    Spdz,
}

/// What a node does during a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Behavior {
    #[default]
    Honest,
    /// Adds one to every output share it sends.
    WrongShare,
    /// Posts trail commitments that do not open to its shares.
    BrokenCommitment,
    /// Leaves once the output has been opened.
    AbortAfterOutput,
}

/// How a fault was noticed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detection {
    MacCheck,
    AuditTrail,
    ShareConsistency,
    Timeout,
}

macro_rules! word_enum {
    ($ty:ty, $($v:path => $w:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $w),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($w => Ok($v),)+
                    other => Err(format!("unknown {} '{other}'", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

word_enum!(Mode, Mode::Shamir => "shamir", Mode::Spdz => "spdz");
word_enum!(
    Behavior,
    Behavior::Honest => "honest",
    Behavior::WrongShare => "wrong-share",
    Behavior::BrokenCommitment => "broken-commitment",
    Behavior::AbortAfterOutput => "abort-after-output",
);
word_enum!(
    Detection,
    Detection::MacCheck => "mac_check",
    Detection::AuditTrail => "audit_trail",
    Detection::ShareConsistency => "share_consistency",
    Detection::Timeout => "timeout",
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_round_trip() {
        for b in [Behavior::Honest, Behavior::WrongShare, Behavior::BrokenCommitment, Behavior::AbortAfterOutput] {
            assert_eq!(b.to_string().parse::<Behavior>(), Ok(b));
        }
        for d in [Detection::MacCheck, Detection::AuditTrail, Detection::ShareConsistency, Detection::Timeout] {
            assert_eq!(d.to_string().parse::<Detection>(), Ok(d));
        }
        assert_eq!("spdz".parse::<Mode>(), Ok(Mode::Spdz));
        assert!("bogus".parse::<Behavior>().is_err());
    }
}
