//! Kademlia-style DHT simulator.
//!
//! Routing is plain XOR Kademlia. Storage placement prefers reputable nodes
//! with spare capacity among the XOR-closest candidates via
//! [`weighted_distance`]. Every RPC travels over [`SecureBroadcast`] so only
//! the two endpoints can read it.
//!
//! [`SecureBroadcast`]: crate::net::SecureBroadcast

mod persist;
mod protocol;
mod sim;

pub use persist::{decode_records, encode_records, PersistError, FLAG_ENCRYPTED, FLAG_RESTRICTED};
pub use protocol::{protocol_load, protocol_store, record_address};
pub use sim::{DhtConfig, DhtNetwork, DhtNode, Lookup, Record, StoreReceipt};

use std::collections::VecDeque;

use thiserror::Error;

use crate::crypto::Key256;

pub const K_BUCKET: usize = 8;
pub const REPLICATION: usize = 3;
pub const ALPHA: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DhtError {
    #[error("key not found")]
    NotFound,
    #[error("no live node to route through")]
    NoRoute,
    #[error("record is access-restricted")]
    Restricted,
}

/// Identity plus the preference inputs used for placement.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: Key256,
    pub reputation: f64,
    /// Load headroom in `[0, 1]`.
    pub capacity: f64,
}

impl NodeInfo {
    pub fn new(id: Key256) -> Self {
        Self { id, reputation: 0.0, capacity: 1.0 }
    }

    /// `reputation / (1 + reputation)`, in `[0, 1)`.
    pub fn reputation_norm(&self) -> f64 {
        let r = self.reputation.max(0.0);
        r / (1.0 + r)
    }

    pub fn preference(&self) -> f64 {
        self.reputation_norm() * self.capacity.clamp(0.0, 1.0)
    }
}

pub fn xor_distance(a: &Key256, b: &Key256) -> Key256 {
    a.xor(b)
}

/// `log2(1 + d)` for a 256-bit `d`, accurate to double precision.
pub fn log2_1p(d: &Key256) -> f64 {
    let Some(i) = d.0.iter().position(|&b| b != 0) else {
        return 0.0;
    };
    let end = (i + 16).min(32);
    let v = d.0[i..end].iter().fold(0u128, |acc, &b| acc << 8 | b as u128);
    let rest = (32 - end) * 8;
    if rest == 0 {
        (v as f64 + 1.0).log2()
    } else {
        (v as f64).log2() + rest as f64
    }
}

/// `log2(1 + xor(a, b)) - lambda * preference(b)`; lower is better.
pub fn weighted_distance(a: &Key256, b: &NodeInfo, lambda: f64) -> f64 {
    log2_1p(&xor_distance(a, &b.id)) - lambda * b.preference()
}

/// Sorts `candidates` by weighted distance to `target`, ties by XOR.
pub fn rank_weighted<'a>(target: &Key256, candidates: &'a [NodeInfo], lambda: f64) -> Vec<&'a NodeInfo> {
    let mut v: Vec<(f64, Key256, &NodeInfo)> = candidates
        .iter()
        .map(|c| (weighted_distance(target, c, lambda), xor_distance(target, &c.id), c))
        .collect();
    v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    v.into_iter().map(|(_, _, c)| c).collect()
}

/// Peers in one distance range, least recently seen first.
#[derive(Debug, Clone, Default)]
pub struct Bucket {
    peers: VecDeque<Key256>,
}

impl Bucket {
    pub fn peers(&self) -> impl Iterator<Item = &Key256> {
        self.peers.iter()
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    /// Records contact with `id`. When full, the least recently seen peer is
    /// evicted only if it no longer answers; returns the evicted peer.
    pub fn touch(&mut self, id: Key256, capacity: usize, alive: impl Fn(&Key256) -> bool) -> Option<Key256> {
        if let Some(pos) = self.peers.iter().position(|p| *p == id) {
            self.peers.remove(pos);
            self.peers.push_back(id);
            return None;
        }
        if self.peers.len() < capacity {
            self.peers.push_back(id);
            return None;
        }
        let head = *self.peers.front().unwrap();
        self.peers.pop_front();
        if alive(&head) {
            self.peers.push_back(head);
            None
        } else {
            self.peers.push_back(id);
            Some(head)
        }
    }

    pub fn remove(&mut self, id: &Key256) {
        self.peers.retain(|p| p != id);
    }
}

#[derive(Debug, Clone)]
pub struct RoutingTable {
    own: Key256,
    capacity: usize,
    buckets: Vec<Bucket>,
}

impl RoutingTable {
    pub fn new(own: Key256, capacity: usize) -> Self {
        Self { own, capacity, buckets: vec![Bucket::default(); 256] }
    }

    pub fn bucket_index(&self, other: &Key256) -> Option<usize> {
        let lz = xor_distance(&self.own, other).leading_zeros() as usize;
        (lz < 256).then(|| 255 - lz)
    }

    pub fn bucket(&self, i: usize) -> &Bucket {
        &self.buckets[i]
    }

    pub fn touch(&mut self, id: Key256, alive: impl Fn(&Key256) -> bool) -> Option<Key256> {
        let i = self.bucket_index(&id)?;
        self.buckets[i].touch(id, self.capacity, alive)
    }

    pub fn remove(&mut self, id: &Key256) {
        if let Some(i) = self.bucket_index(id) {
            self.buckets[i].remove(id);
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Bucket::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Up to `count` known peers, XOR-closest to `target` first.
    pub fn closest(&self, target: &Key256, count: usize) -> Vec<Key256> {
        let mut all: Vec<Key256> = self.buckets.iter().flat_map(|b| b.peers().copied()).collect();
        all.sort_by_key(|p| xor_distance(p, target));
        all.truncate(count);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn small(v: u8) -> Key256 {
        let mut k = Key256::ZERO;
        k.0[31] = v;
        k
    }

    #[test]
    fn xor_metric() {
        assert_eq!(xor_distance(&small(0b1010), &small(0b0110)), small(12));
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (a, b) = (Key256::random(&mut rng), Key256::random(&mut rng));
            assert_eq!(xor_distance(&a, &b), xor_distance(&b, &a));
            assert_eq!(xor_distance(&a, &a), Key256::ZERO);
        }
    }

    #[test]
    fn log2_matches_small_values() {
        assert_eq!(log2_1p(&Key256::ZERO), 0.0);
        assert_eq!(log2_1p(&small(1)), 1.0);
        assert_eq!(log2_1p(&small(255)), 8.0);
        let mut top = Key256::ZERO;
        top.0[0] = 0x80;
        assert!((log2_1p(&top) - 255.0).abs() < 1e-9);
    }

    #[test]
    fn lambda_zero_is_xor_ranking() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..200 {
            let target = Key256::random(&mut rng);
            let cands: Vec<NodeInfo> = (0..rng.gen_range(1..20))
                .map(|_| NodeInfo {
                    id: Key256::random(&mut rng),
                    reputation: rng.gen_range(0.0..10.0),
                    capacity: rng.gen_range(0.0..1.0),
                })
                .collect();
            let weighted: Vec<Key256> = rank_weighted(&target, &cands, 0.0).iter().map(|c| c.id).collect();
            let mut xor: Vec<Key256> = cands.iter().map(|c| c.id).collect();
            xor.sort_by_key(|id| xor_distance(id, &target));
            assert_eq!(weighted, xor);
        }
    }

    #[test]
    fn reputation_lowers_score() {
        let t = Key256::ZERO;
        let mut a = NodeInfo::new(small(40));
        let b = a.clone();
        a.reputation = 3.0;
        assert!(weighted_distance(&t, &a, 0.5) < weighted_distance(&t, &b, 0.5));
    }

    #[test]
    fn reputation_effect_is_bounded() {
        // A node at distance 2^r with preference w never beats a plain node
        // that is closer than 2^(r - lambda*w).
        let lambda = DEFAULT_LAMBDA;
        let t = Key256::ZERO;
        for r in 4..250u32 {
            for step in 0..=10 {
                let w = step as f64 / 10.0;
                let mut far = Key256::ZERO;
                far.0[31 - (r / 8) as usize] = 1 << (r % 8);
                // reputation chosen so that preference == w at capacity 1.
                let boosted = NodeInfo { id: far, reputation: if w < 1.0 { w / (1.0 - w) } else { 1e12 }, capacity: 1.0 };
                let bound = r as f64 - lambda * w - 0.01;
                let near_bits = bound.floor() as u32;
                let mut near = Key256::ZERO;
                near.0[31 - (near_bits / 8) as usize] = 1 << (near_bits % 8);
                let plain = NodeInfo::new(near);
                assert!(
                    weighted_distance(&t, &boosted, lambda) > weighted_distance(&t, &plain, lambda),
                    "r={r} w={w}"
                );
            }
        }
    }

    #[test]
    fn bucket_lru() {
        let mut b = Bucket::default();
        for i in 0..3 {
            b.touch(small(i), 3, |_| true);
        }
        b.touch(small(0), 3, |_| true);
        assert_eq!(b.peers().copied().collect::<Vec<_>>(), vec![small(1), small(2), small(0)]);
        // Full, head alive: newcomer dropped.
        assert_eq!(b.touch(small(9), 3, |_| true), None);
        assert!(!b.peers().any(|p| *p == small(9)));
        // Full, head dead: head evicted.
        assert_eq!(b.touch(small(9), 3, |p| *p != small(2)), Some(small(2)));
        assert_eq!(b.peers().copied().collect::<Vec<_>>(), vec![small(0), small(1), small(9)]);
    }

    #[test]
    fn table_buckets_by_prefix() {
        let t = RoutingTable::new(Key256::ZERO, K_BUCKET);
        assert_eq!(t.bucket_index(&Key256::ZERO), None);
        assert_eq!(t.bucket_index(&small(1)), Some(0));
        assert_eq!(t.bucket_index(&small(12)), Some(3));
    }
}
