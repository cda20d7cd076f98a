//! Point-to-point message channels for the in-process simulator.
//!
//! Protocols never touch each other's state directly; everything a party
//! learns from another party arrives through a [`Channel`]. [`LocalNet`]
//! is the plain in-memory transport with counters and per-party logs.
//! [`SecureBroadcast`] models secure channels built from a broadcast medium
//! plus public-key encryption: every payload is sealed to the recipient and
//! every other party's decryption attempt is checked to fail.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::RngCore;
use thiserror::Error;
use x25519_dalek::{PublicKey as DhPublic, StaticSecret};

use crate::crypto::{self, hash};

pub type PartyId = usize;

/// Idle simulator steps before a missing message is declared a timeout.
pub const DEFAULT_TIMEOUT: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("timed out waiting for party {from} -> {to} after {waited} idle steps")]
    Timeout { from: PartyId, to: PartyId, waited: u64 },
    #[error("message from party {from} to {to} failed authentication")]
    Tampered { from: PartyId, to: PartyId },
    #[error("party index {0} outside the committee")]
    UnknownParty(PartyId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// One entry in a party's view of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub round: u64,
    pub direction: Direction,
    pub peer: PartyId,
    pub payload: Vec<u8>,
}

/// Traffic counters shared by every channel implementation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetStats {
    pub sent: u64,
    /// Messages per closed round.
    pub rounds: Vec<u64>,
    pub current: u64,
    /// Simulator clock: one step per round plus idle steps spent waiting.
    pub clock: u64,
    /// Rounds in which each party sent or received something.
    pub active: BTreeMap<PartyId, BTreeSet<u64>>,
    /// Messages sent per party.
    pub sent_by: BTreeMap<PartyId, u64>,
}

impl NetStats {
    pub fn round_index(&self) -> u64 {
        self.rounds.len() as u64
    }

    fn touch(&mut self, party: PartyId) {
        let r = self.round_index();
        self.active.entry(party).or_default().insert(r);
    }

    /// Per-round counts including the still-open round.
    pub fn all_rounds(&self) -> Vec<u64> {
        let mut v = self.rounds.clone();
        if self.current > 0 {
            v.push(self.current);
        }
        v
    }
}

pub trait Channel {
    fn send(&mut self, from: PartyId, to: PartyId, payload: Vec<u8>);
    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Vec<u8>, NetError>;
    /// Close the current communication round.
    fn end_round(&mut self);
    fn stats(&self) -> &NetStats;
    /// Messages from an offline party are dropped.
    fn set_offline(&mut self, party: PartyId);
    fn is_offline(&self, party: PartyId) -> bool;
    /// Drops queued messages nobody read, as a node does after a timeout.
    /// Returns how many were dropped.
    fn discard_pending(&mut self) -> usize;

    fn messages_sent(&self) -> u64 {
        self.stats().sent
    }
}

/// Plain in-memory transport.
#[derive(Debug, Default)]
pub struct LocalNet {
    queues: BTreeMap<(PartyId, PartyId), VecDeque<Vec<u8>>>,
    stats: NetStats,
    offline: BTreeSet<PartyId>,
    timeout: u64,
    logs: Option<BTreeMap<PartyId, Vec<LogRecord>>>,
}

impl LocalNet {
    pub fn new() -> Self {
        Self { timeout: DEFAULT_TIMEOUT, ..Default::default() }
    }

    /// Record every party's view of the traffic.
    pub fn with_logs() -> Self {
        Self { timeout: DEFAULT_TIMEOUT, logs: Some(BTreeMap::new()), ..Default::default() }
    }

    pub fn set_timeout(&mut self, steps: u64) {
        self.timeout = steps;
    }

    pub fn logs(&self) -> Option<&BTreeMap<PartyId, Vec<LogRecord>>> {
        self.logs.as_ref()
    }

    fn log(&mut self, party: PartyId, direction: Direction, peer: PartyId, payload: &[u8]) {
        let round = self.stats.round_index();
        if let Some(logs) = self.logs.as_mut() {
            logs.entry(party).or_default().push(LogRecord {
                round,
                direction,
                peer,
                payload: payload.to_vec(),
            });
        }
    }
}

impl Channel for LocalNet {
    fn send(&mut self, from: PartyId, to: PartyId, payload: Vec<u8>) {
        if self.offline.contains(&from) {
            return;
        }
        self.stats.sent += 1;
        self.stats.current += 1;
        *self.stats.sent_by.entry(from).or_default() += 1;
        self.stats.touch(from);
        self.log(from, Direction::Sent, to, &payload);
        self.queues.entry((from, to)).or_default().push_back(payload);
    }

    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Vec<u8>, NetError> {
        match self.queues.get_mut(&(from, to)).and_then(|q| q.pop_front()) {
            Some(msg) => {
                self.stats.touch(to);
                self.log(to, Direction::Received, from, &msg);
                Ok(msg)
            }
            None => {
                self.stats.clock += self.timeout;
                Err(NetError::Timeout { from, to, waited: self.timeout })
            }
        }
    }

    fn end_round(&mut self) {
        if self.stats.current > 0 {
            let c = self.stats.current;
            self.stats.rounds.push(c);
            self.stats.current = 0;
        }
        self.stats.clock += 1;
    }

    fn stats(&self) -> &NetStats {
        &self.stats
    }

    fn set_offline(&mut self, party: PartyId) {
        self.offline.insert(party);
    }

    fn is_offline(&self, party: PartyId) -> bool {
        self.offline.contains(&party)
    }

    fn discard_pending(&mut self) -> usize {
        let n = self.queues.values().map(VecDeque::len).sum();
        self.queues.clear();
        n
    }
}

/// Secure point-to-point channels simulated over a broadcast medium.
///
/// Each party holds a static X25519 key. A message from `a` to `b` is sealed
/// with ChaCha20-Poly1305 under `H(DH(a, b))` and broadcast; every bystander
/// tries to open it with its own pairwise key and must fail. Logs record only
/// what each endpoint can read in plaintext.
pub struct SecureBroadcast {
    inner: LocalNet,
    secrets: BTreeMap<PartyId, StaticSecret>,
    publics: BTreeMap<PartyId, DhPublic>,
    pair_keys: HashMap<(PartyId, PartyId), [u8; 32]>,
    nonce: u64,
    bystander_opens: u64,
    logs: Option<BTreeMap<PartyId, Vec<LogRecord>>>,
}

impl SecureBroadcast {
    pub fn new<R: RngCore + ?Sized>(parties: impl IntoIterator<Item = PartyId>, rng: &mut R) -> Self {
        let mut secrets = BTreeMap::new();
        let mut publics = BTreeMap::new();
        for p in parties {
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            let s = StaticSecret::from(seed);
            publics.insert(p, DhPublic::from(&s));
            secrets.insert(p, s);
        }
        Self {
            inner: LocalNet::new(),
            secrets,
            publics,
            pair_keys: HashMap::new(),
            nonce: 0,
            bystander_opens: 0,
            logs: None,
        }
    }

    pub fn with_logs(mut self) -> Self {
        self.logs = Some(BTreeMap::new());
        self
    }

    pub fn logs(&self) -> Option<&BTreeMap<PartyId, Vec<LogRecord>>> {
        self.logs.as_ref()
    }

    pub fn parties(&self) -> impl Iterator<Item = PartyId> + '_ {
        self.secrets.keys().copied()
    }

    /// Number of times a bystander managed to open a broadcast payload.
    /// Always zero unless the cipher is broken.
    pub fn bystander_opens(&self) -> u64 {
        self.bystander_opens
    }

    /// Key as derived by `holder` for traffic with `peer`.
    fn pair_key(&mut self, holder: PartyId, peer: PartyId) -> Option<[u8; 32]> {
        let (lo, hi) = if holder < peer { (holder, peer) } else { (peer, holder) };
        if let Some(k) = self.pair_keys.get(&(lo, hi)) {
            return Some(*k);
        }
        let secret = self.secrets.get(&holder)?;
        let public = self.publics.get(&peer)?;
        let shared = secret.diffie_hellman(public);
        let k = hash(&[b"mpcnet/channel", shared.as_bytes()]).0;
        self.pair_keys.insert((lo, hi), k);
        Some(k)
    }

    fn log(&mut self, party: PartyId, direction: Direction, peer: PartyId, payload: &[u8]) {
        let round = self.inner.stats.round_index();
        if let Some(logs) = self.logs.as_mut() {
            logs.entry(party).or_default().push(LogRecord {
                round,
                direction,
                peer,
                payload: payload.to_vec(),
            });
        }
    }
}

impl Channel for SecureBroadcast {
    fn send(&mut self, from: PartyId, to: PartyId, payload: Vec<u8>) {
        if self.inner.is_offline(from) {
            return;
        }
        let Some(key) = self.pair_key(from, to) else {
            return;
        };
        self.nonce += 1;
        let mut nonce = [0u8; 12];
        nonce[4..].copy_from_slice(&self.nonce.to_be_bytes());
        let sealed = crypto::seal(&key, nonce, &payload);
        let bystanders: Vec<PartyId> =
            self.secrets.keys().copied().filter(|&p| p != from && p != to).collect();
        for b in bystanders {
            if let Some(k) = self.pair_key(b, from) {
                if crypto::open(&k, &sealed).is_ok() {
                    self.bystander_opens += 1;
                }
            }
        }
        debug_assert_eq!(self.bystander_opens, 0, "bystander decrypted a sealed message");
        self.log(from, Direction::Sent, to, &payload);
        self.inner.send(from, to, sealed);
    }

    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Vec<u8>, NetError> {
        let sealed = self.inner.recv(from, to)?;
        let key = self.pair_key(to, from).ok_or(NetError::UnknownParty(to))?;
        let plain = crypto::open(&key, &sealed).map_err(|_| NetError::Tampered { from, to })?;
        self.log(to, Direction::Received, from, &plain);
        Ok(plain)
    }

    fn end_round(&mut self) {
        self.inner.end_round();
    }

    fn stats(&self) -> &NetStats {
        self.inner.stats()
    }

    fn set_offline(&mut self, party: PartyId) {
        self.inner.set_offline(party);
    }

    fn is_offline(&self, party: PartyId) -> bool {
        self.inner.is_offline(party)
    }

    fn discard_pending(&mut self) -> usize {
        self.inner.discard_pending()
    }
}

/// Addresses a committee by 1-based share index instead of global party id.
pub struct CommitteeChannel<'a> {
    inner: &'a mut dyn Channel,
    members: &'a [PartyId],
}

impl<'a> CommitteeChannel<'a> {
    pub fn new(inner: &'a mut dyn Channel, members: &'a [PartyId]) -> Self {
        Self { inner, members }
    }

    fn global(&self, index: PartyId) -> PartyId {
        // Out-of-range indices map to an id no real party uses, so the
        // message is counted but never delivered.
        index
            .checked_sub(1)
            .and_then(|i| self.members.get(i).copied())
            .unwrap_or(PartyId::MAX)
    }
}

impl Channel for CommitteeChannel<'_> {
    fn send(&mut self, from: PartyId, to: PartyId, payload: Vec<u8>) {
        let (f, t) = (self.global(from), self.global(to));
        self.inner.send(f, t, payload);
    }

    fn recv(&mut self, from: PartyId, to: PartyId) -> Result<Vec<u8>, NetError> {
        let (f, t) = (self.global(from), self.global(to));
        self.inner.recv(f, t).map_err(|e| match e {
            NetError::Timeout { waited, .. } => NetError::Timeout { from, to, waited },
            other => other,
        })
    }

    fn end_round(&mut self) {
        self.inner.end_round();
    }

    fn stats(&self) -> &NetStats {
        self.inner.stats()
    }

    fn set_offline(&mut self, party: PartyId) {
        let g = self.global(party);
        self.inner.set_offline(g);
    }

    fn is_offline(&self, party: PartyId) -> bool {
        self.inner.is_offline(self.global(party))
    }

    fn discard_pending(&mut self) -> usize {
        self.inner.discard_pending()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn local_counts_and_timeout() {
        let mut net = LocalNet::with_logs();
        net.send(0, 1, vec![1, 2, 3]);
        net.send(1, 0, vec![4]);
        net.end_round();
        assert_eq!(net.recv(0, 1).unwrap(), vec![1, 2, 3]);
        assert!(matches!(net.recv(0, 1), Err(NetError::Timeout { waited: 3, .. })));
        assert_eq!(net.stats().rounds, vec![2]);
        assert_eq!(net.logs().unwrap()[&1].len(), 2);
        net.set_offline(2);
        net.send(2, 0, vec![9]);
        assert_eq!(net.messages_sent(), 2);
    }

    #[test]
    fn secure_broadcast_delivers_only_to_recipient() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut net = SecureBroadcast::new(0..5, &mut rng).with_logs();
        for to in 1..5 {
            net.send(0, to, format!("hello {to}").into_bytes());
        }
        for to in 1..5 {
            assert_eq!(net.recv(0, to).unwrap(), format!("hello {to}").into_bytes());
        }
        assert_eq!(net.bystander_opens(), 0);
        assert_eq!(net.messages_sent(), 4);
        assert!(net.logs().unwrap()[&3].iter().all(|r| r.payload == b"hello 3" || r.peer != 0));
    }

    #[test]
    fn committee_channel_maps_indices() {
        let mut net = LocalNet::new();
        let members = [7, 9, 11];
        {
            let mut ch = CommitteeChannel::new(&mut net, &members);
            ch.send(1, 3, vec![5]);
            assert_eq!(ch.recv(1, 3).unwrap(), vec![5]);
        }
        assert_eq!(net.stats().sent_by[&7], 1);
    }
}
