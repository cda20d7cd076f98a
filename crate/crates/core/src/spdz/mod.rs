//! SPDZ-style online phase over full-threshold additive shares.
//!
//! Every party holds `(value share, MAC share)` with the MAC shares summing
//! to `alpha * s` under a global key `alpha` that is never opened. Linear
//! operations are local; multiplication consumes a Beaver triple and two
//! partial openings. Opened values queue up for a batched MAC check.

mod audit;
mod dealer;
mod pedersen;
mod pv;

pub use audit::{audit_trail, trail_key, trail_parties, AuditError, AuditVerdict, TrailRecord, TrailWriter, WireId};
pub use dealer::{deal_authenticated, deal_triple_with, deal_triples, Preprocessing, TrustedDealer};
pub use pedersen::{CommitParams, Commitment};
pub use pv::{pv_share, PvEngine, PvShare, PvTriple};

use rand::Rng;
use thiserror::Error;

use crate::crypto::hash;
use crate::field::{Fe, Field};
use crate::ledger::LedgerError;
use crate::net::{Channel, NetError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpdzError {
    #[error("need at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("party sets do not line up: {0}")]
    MismatchedParties(String),
    #[error("triple already consumed")]
    TripleReuse,
    #[error("party {0} did not contribute")]
    MissingParty(usize),
    #[error("MAC check on a batch of {batch} opened values failed")]
    CheatDetected { batch: usize },
    #[error("MAC check called with nothing to check")]
    EmptyQueue,
    #[error("malformed message from party {0}")]
    Malformed(usize),
    #[error("ledger rejected a posting: {0}")]
    LedgerRejected(#[from] LedgerError),
    #[error("no commitment group for p = {0} within 64 bits")]
    NoCommitGroup(u64),
}

/// The global MAC key as issued by the dealer.
#[derive(Debug, Clone)]
pub struct MacKey {
    pub alpha: Fe,
    pub alpha_shares: Vec<Fe>,
}

impl MacKey {
    pub fn generate<R: Rng + ?Sized>(field: Field, n: usize, rng: &mut R) -> Result<MacKey, SpdzError> {
        if n < 2 {
            return Err(SpdzError::TooFewParties(n));
        }
        let alpha = field.random(rng);
        Ok(MacKey { alpha, alpha_shares: additive_split(alpha, n, rng) })
    }

    pub fn parties(&self) -> usize {
        self.alpha_shares.len()
    }
}

/// Uniform `n`-way additive split of `value`.
pub fn additive_split<R: Rng + ?Sized>(value: Fe, n: usize, rng: &mut R) -> Vec<Fe> {
    let field = value.field();
    let mut parts: Vec<Fe> = (0..n.saturating_sub(1)).map(|_| field.random(rng)).collect();
    let rest = parts.iter().fold(value, |acc, x| acc - *x);
    parts.push(rest);
    parts
}

/// One party's authenticated share. `owner` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthShare {
    pub value: Fe,
    pub mac: Fe,
    pub owner: usize,
}

/// All parties' shares of one authenticated value, ordered by owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthSharing {
    pub shares: Vec<AuthShare>,
}

impl AuthSharing {
    pub fn parties(&self) -> usize {
        self.shares.len()
    }

    pub fn field(&self) -> Field {
        self.shares[0].value.field()
    }

    /// Plaintext sum of value shares. Dealer/test view only.
    pub fn value_sum(&self) -> Fe {
        self.field().sum(self.shares.iter().map(|s| s.value))
    }

    /// Plaintext sum of MAC shares. Dealer/test view only.
    pub fn mac_sum(&self) -> Fe {
        self.field().sum(self.shares.iter().map(|s| s.mac))
    }
}

/// A value opened during the online phase, awaiting MAC verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenedValue {
    pub value: Fe,
    pub mac_shares: Vec<Fe>,
}

/// Preprocessed multiplication triple, consumed on use.
#[derive(Debug, Clone)]
pub struct BeaverTriple {
    pub a: AuthSharing,
    pub b: AuthSharing,
    pub c: AuthSharing,
    consumed: bool,
}

impl BeaverTriple {
    pub fn new(a: AuthSharing, b: AuthSharing, c: AuthSharing) -> Self {
        Self { a, b, c, consumed: false }
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Online-phase state for one committee: every party's MAC-key share plus
/// the queue of opened values not yet MAC-checked.
#[derive(Debug, Clone)]
pub struct SpdzEngine {
    field: Field,
    alpha_shares: Vec<Fe>,
    pending: Vec<OpenedValue>,
}

impl SpdzEngine {
    pub fn new(field: Field, alpha_shares: Vec<Fe>) -> Self {
        Self { field, alpha_shares, pending: Vec::new() }
    }

    pub fn parties(&self) -> usize {
        self.alpha_shares.len()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn pending(&self) -> &[OpenedValue] {
        &self.pending
    }

    /// Fault-injection access to the MAC-check queue.
    pub fn pending_mut(&mut self) -> &mut Vec<OpenedValue> {
        &mut self.pending
    }

    /// `sum_j coeff_j * <x_j> + constant`, without communication.
    pub fn auth_linear(&self, terms: &[(Fe, &AuthSharing)], constant: Fe) -> Result<AuthSharing, SpdzError> {
        let n = self.parties();
        for (_, x) in terms {
            if x.parties() != n || x.shares.iter().enumerate().any(|(i, s)| s.owner != i + 1) {
                return Err(SpdzError::MismatchedParties(format!(
                    "operand over {} parties, engine has {n}",
                    x.parties()
                )));
            }
        }
        let shares = (0..n)
            .map(|i| {
                let mut value = self.field.zero();
                let mut mac = self.field.zero();
                for (c, x) in terms {
                    value += *c * x.shares[i].value;
                    mac += *c * x.shares[i].mac;
                }
                if i == 0 {
                    value += constant;
                }
                mac += self.alpha_shares[i] * constant;
                AuthShare { value, mac, owner: i + 1 }
            })
            .collect();
        Ok(AuthSharing { shares })
    }

    /// Every party broadcasts its value share; the sum is queued for the
    /// MAC check together with the parties' MAC shares. `net` is addressed
    /// by owner index.
    pub fn partial_open(&mut self, x: &AuthSharing, net: &mut dyn Channel) -> Result<Fe, SpdzError> {
        let n = self.parties();
        if x.parties() != n {
            return Err(SpdzError::MismatchedParties(format!("{} shares for {n} parties", x.parties())));
        }
        let received = broadcast_round(net, n, |i| x.shares[i].value.to_bytes().to_vec())?;
        // Every receiver sums the same contributions; use party 1's view.
        let mut value = x.shares[0].value;
        for (from, bytes) in received[0].iter() {
            value += self.field.decode(bytes).map_err(|_| SpdzError::Malformed(*from))?;
        }
        self.pending.push(OpenedValue { value, mac_shares: x.shares.iter().map(|s| s.mac).collect() });
        Ok(value)
    }

    /// `<x*y> = <c> + eps<b> + delta<a> + eps*delta` with `eps = x - a`,
    /// `delta = y - b` partially opened.
    pub fn beaver_mul(
        &mut self,
        x: &AuthSharing,
        y: &AuthSharing,
        triple: &mut BeaverTriple,
        net: &mut dyn Channel,
    ) -> Result<AuthSharing, SpdzError> {
        if triple.consumed {
            return Err(SpdzError::TripleReuse);
        }
        triple.consumed = true;
        let one = self.field.one();
        let eps_sh = self.auth_linear(&[(one, x), (-one, &triple.a)], self.field.zero())?;
        let delta_sh = self.auth_linear(&[(one, y), (-one, &triple.b)], self.field.zero())?;
        let eps = self.partial_open(&eps_sh, net)?;
        let delta = self.partial_open(&delta_sh, net)?;
        self.auth_linear(&[(one, &triple.c), (eps, &triple.b), (delta, &triple.a)], eps * delta)
    }

    /// Batched MAC check over everything opened since the last check.
    ///
    /// Public random coefficients `rho_k` combine the queue; party `i`
    /// computes `sigma_i = sum_k rho_k (mac_ki - alpha_i * s_k)`, commits to
    /// it with a hash commitment, then opens. Passes iff the sigmas sum to
    /// zero. The queue is drained either way and `alpha` stays hidden.
    pub fn mac_check<R: Rng + ?Sized>(&mut self, net: &mut dyn Channel, rng: &mut R) -> Result<(), SpdzError> {
        if self.pending.is_empty() {
            return Err(SpdzError::EmptyQueue);
        }
        let batch = std::mem::take(&mut self.pending);
        let n = self.parties();
        let rho: Vec<Fe> = batch.iter().map(|_| self.field.random(rng)).collect();
        let sigma: Vec<Fe> = (0..n)
            .map(|i| {
                self.field.sum(
                    batch
                        .iter()
                        .zip(&rho)
                        .map(|(o, r)| *r * (o.mac_shares[i] - self.alpha_shares[i] * o.value)),
                )
            })
            .collect();
        let nonces: Vec<[u8; 32]> = (0..n)
            .map(|_| {
                let mut b = [0u8; 32];
                rng.fill_bytes(&mut b);
                b
            })
            .collect();
        let commit = |i: usize| hash(&[&sigma[i].to_bytes(), &nonces[i]]).0.to_vec();
        let commitments = broadcast_round(net, n, commit)?;
        let openings = broadcast_round(net, n, |i| {
            let mut m = sigma[i].to_bytes().to_vec();
            m.extend_from_slice(&nonces[i]);
            m
        })?;
        // Party 1 checks everyone's opening against their commitment.
        let mut total = sigma[0];
        for ((from, c), (_, o)) in commitments[0].iter().zip(&openings[0]) {
            if o.len() != 40 || hash(&[&o[..8], &o[8..]]).0.as_slice() != c.as_slice() {
                return Err(SpdzError::CheatDetected { batch: batch.len() });
            }
            total += self.field.decode(&o[..8]).map_err(|_| SpdzError::Malformed(*from))?;
        }
        if total.is_zero() {
            Ok(())
        } else {
            Err(SpdzError::CheatDetected { batch: batch.len() })
        }
    }
}

/// One all-to-all round. Returns, for every receiver (0-based), the
/// `(sender owner, payload)` pairs from all other parties in owner order.
fn broadcast_round(
    net: &mut dyn Channel,
    n: usize,
    payload: impl Fn(usize) -> Vec<u8>,
) -> Result<Vec<Vec<(usize, Vec<u8>)>>, SpdzError> {
    for i in 0..n {
        let msg = payload(i);
        for j in 0..n {
            if i != j {
                net.send(i + 1, j + 1, msg.clone());
            }
        }
    }
    net.end_round();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut got = Vec::with_capacity(n - 1);
        for i in 0..n {
            if i != j {
                let m = net.recv(i + 1, j + 1).map_err(|e| match e {
                    NetError::Timeout { .. } => SpdzError::MissingParty(i + 1),
                    _ => SpdzError::Malformed(i + 1),
                })?;
                got.push((i + 1, m));
            }
        }
        out.push(got);
    }
    Ok(out)
}
