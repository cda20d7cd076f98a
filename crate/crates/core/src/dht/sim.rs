use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, RngCore};

use super::persist::{decode_records, encode_records, FLAG_RESTRICTED};
use super::{rank_weighted, xor_distance, DhtError, NodeInfo, RoutingTable, ALPHA, DEFAULT_LAMBDA, K_BUCKET, REPLICATION};
use crate::crypto::Key256;
use crate::net::{Channel, NetStats, SecureBroadcast};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhtConfig {
    pub k: usize,
    pub replication: usize,
    pub alpha: usize,
    pub lambda: f64,
}

impl Default for DhtConfig {
    fn default() -> Self {
        Self { k: K_BUCKET, replication: REPLICATION, alpha: ALPHA, lambda: DEFAULT_LAMBDA }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub value: Vec<u8>,
    pub flags: u8,
}

#[derive(Debug, Clone)]
pub struct DhtNode {
    pub info: NodeInfo,
    table: RoutingTable,
    store: BTreeMap<Key256, Record>,
    /// The node's persistent store file.
    disk: Vec<u8>,
}

impl DhtNode {
    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn records(&self) -> &BTreeMap<Key256, Record> {
        &self.store
    }

    pub fn disk(&self) -> &[u8] {
        &self.disk
    }

    fn persist(&mut self) {
        self.disk = encode_records(self.store.iter().map(|(k, r)| (k, r.flags, r.value.as_slice())));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lookup {
    /// Live node indices, XOR-closest to the target first.
    pub closest: Vec<usize>,
    /// Parallel query rounds.
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreReceipt {
    pub replicas: Vec<usize>,
    pub hops: u32,
}

const RPC_FIND: u8 = 0;
const RPC_FIND_VALUE: u8 = 1;
const RPC_STORE: u8 = 2;
const RPC_DELETE: u8 = 3;
const RPC_FLAGS: u8 = 4;

/// In-process network of DHT nodes, indexed `0..len()`.
pub struct DhtNetwork {
    cfg: DhtConfig,
    nodes: Vec<DhtNode>,
    alive: Vec<bool>,
    index: HashMap<Key256, usize>,
    net: SecureBroadcast,
}

impl DhtNetwork {
    /// Nodes join one by one through node 0, then refresh their tables.
    pub fn bootstrap<R: RngCore + ?Sized>(infos: Vec<NodeInfo>, cfg: DhtConfig, rng: &mut R) -> DhtNetwork {
        let n = infos.len();
        let net = SecureBroadcast::new(0..n, rng);
        let index = infos.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let nodes = infos
            .into_iter()
            .map(|info| DhtNode { table: RoutingTable::new(info.id, cfg.k), info, store: BTreeMap::new(), disk: Vec::new() })
            .collect();
        let mut dht = DhtNetwork { cfg, nodes, alive: vec![true; n], index, net };
        for i in 1..n {
            let id0 = dht.nodes[0].info.id;
            dht.touch(i, id0);
            let own = dht.nodes[i].info.id;
            dht.find_node(i, &own);
        }
        for i in 0..n {
            let own = dht.nodes[i].info.id;
            dht.find_node(i, &own);
        }
        dht
    }

    /// `n` nodes with random ids, reputations in `[0, 5)` and capacities in
    /// `[0.2, 1)`.
    pub fn random<R: Rng + ?Sized>(n: usize, cfg: DhtConfig, rng: &mut R) -> DhtNetwork {
        let infos = (0..n)
            .map(|_| NodeInfo {
                id: Key256::random(rng),
                reputation: rng.gen_range(0.0..5.0),
                capacity: rng.gen_range(0.2..1.0),
            })
            .collect();
        Self::bootstrap(infos, cfg, rng)
    }

    pub fn config(&self) -> DhtConfig {
        self.cfg
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &DhtNode {
        &self.nodes[i]
    }

    pub fn node_index(&self, id: &Key256) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn channel(&self) -> &SecureBroadcast {
        &self.net
    }

    pub fn net_stats(&self) -> &NetStats {
        self.net.stats()
    }

    /// Crash: in-memory state is lost, the store file survives.
    pub fn kill(&mut self, i: usize) {
        self.alive[i] = false;
        self.nodes[i].store.clear();
    }

    /// Restart from the store file.
    pub fn restart(&mut self, i: usize) {
        let node = &mut self.nodes[i];
        node.store = decode_records(&node.disk)
            .expect("store file written by this node")
            .into_iter()
            .map(|(k, flags, value)| (k, Record { value, flags }))
            .collect();
        self.alive[i] = true;
    }

    /// First live node; clients enter the network through it.
    pub fn gateway(&self) -> Result<usize, DhtError> {
        self.alive.iter().position(|a| *a).ok_or(DhtError::NoRoute)
    }

    /// Live nodes holding `key`.
    pub fn holders(&self, key: &Key256) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.alive[i] && self.nodes[i].store.contains_key(key)).collect()
    }

    fn touch(&mut self, at: usize, id: Key256) {
        let (alive, index) = (&self.alive, &self.index);
        self.nodes[at].table.touch(id, |p| index.get(p).is_some_and(|&j| alive[j]));
    }

    fn rpc(&mut self, from: usize, to: usize, request: Vec<u8>) -> Option<Vec<u8>> {
        if !self.alive[to] {
            let dead = self.nodes[to].info.id;
            self.nodes[from].table.remove(&dead);
            return None;
        }
        self.net.send(from, to, request);
        self.net.end_round();
        let req = self.net.recv(from, to).ok()?;
        let sender = self.nodes[from].info.id;
        self.touch(to, sender);
        let resp = self.handle(to, &req);
        self.net.send(to, from, resp);
        self.net.end_round();
        let resp = self.net.recv(to, from).ok()?;
        let responder = self.nodes[to].info.id;
        self.touch(from, responder);
        Some(resp)
    }

    fn handle(&mut self, at: usize, req: &[u8]) -> Vec<u8> {
        let key = Key256(req[1..33].try_into().unwrap());
        let node = &mut self.nodes[at];
        match req[0] {
            RPC_FIND | RPC_FIND_VALUE => {
                if req[0] == RPC_FIND_VALUE {
                    if let Some(r) = node.store.get(&key) {
                        let mut out = vec![1, r.flags];
                        out.extend_from_slice(&r.value);
                        return out;
                    }
                }
                let mut out = vec![0];
                for p in node.table.closest(&key, self.cfg.k) {
                    out.extend_from_slice(&p.0);
                }
                out
            }
            RPC_STORE => {
                node.store.insert(key, Record { flags: req[33], value: req[34..].to_vec() });
                node.persist();
                vec![1]
            }
            RPC_DELETE => {
                let had = node.store.remove(&key).is_some();
                node.persist();
                vec![had as u8]
            }
            RPC_FLAGS => {
                let hit = node.store.get_mut(&key).map(|r| r.flags = req[33]).is_some();
                node.persist();
                vec![hit as u8]
            }
            _ => vec![],
        }
    }

    /// Iterative lookup from `origin`. Stops early when `want_value` and a
    /// queried node holds the key.
    fn iterate(&mut self, origin: usize, target: &Key256, want_value: bool) -> (Lookup, Option<Record>) {
        let k = self.cfg.k;
        let mut short: BTreeMap<Key256, usize> = BTreeMap::new();
        let mut queried: HashSet<usize> = HashSet::new();
        queried.insert(origin);
        short.insert(xor_distance(&self.nodes[origin].info.id, target), origin);
        for p in self.nodes[origin].table.closest(target, k) {
            if let Some(&j) = self.index.get(&p) {
                short.insert(xor_distance(&p, target), j);
            }
        }
        let mut hops = 0;
        loop {
            let batch: Vec<(Key256, usize)> = short
                .iter()
                .take(k)
                .filter(|(_, j)| !queried.contains(j))
                .take(self.cfg.alpha)
                .map(|(d, j)| (*d, *j))
                .collect();
            if batch.is_empty() {
                break;
            }
            hops += 1;
            let tag = if want_value { RPC_FIND_VALUE } else { RPC_FIND };
            for (d, j) in batch {
                queried.insert(j);
                let mut req = vec![tag];
                req.extend_from_slice(&target.0);
                match self.rpc(origin, j, req) {
                    None => {
                        short.remove(&d);
                    }
                    Some(resp) if resp.first() == Some(&1) => {
                        let rec = Record { flags: resp[1], value: resp[2..].to_vec() };
                        let closest = short.values().copied().take(k).collect();
                        return (Lookup { closest, hops }, Some(rec));
                    }
                    Some(resp) => {
                        for chunk in resp[1..].chunks_exact(32) {
                            let id = Key256(chunk.try_into().unwrap());
                            if let Some(&m) = self.index.get(&id) {
                                short.insert(xor_distance(&id, target), m);
                            }
                        }
                    }
                }
            }
            while short.len() > k {
                short.pop_last();
            }
        }
        let closest = short.values().copied().filter(|&j| self.alive[j]).collect();
        (Lookup { closest, hops }, None)
    }

    pub fn find_node(&mut self, origin: usize, target: &Key256) -> Lookup {
        self.iterate(origin, target, false).0
    }

    /// Replicates to the `replication` best of the XOR-closest nodes ranked
    /// by weighted distance.
    pub fn store(&mut self, key: Key256, value: &[u8], flags: u8) -> Result<StoreReceipt, DhtError> {
        let origin = self.gateway()?;
        let lookup = self.find_node(origin, &key);
        let cands: Vec<NodeInfo> = lookup.closest.iter().map(|&j| self.nodes[j].info.clone()).collect();
        let ranked: Vec<usize> = rank_weighted(&key, &cands, self.cfg.lambda)
            .into_iter()
            .map(|c| self.index[&c.id])
            .take(self.cfg.replication)
            .collect();
        let mut replicas = Vec::new();
        for j in ranked {
            let mut req = vec![RPC_STORE];
            req.extend_from_slice(&key.0);
            req.push(flags);
            req.extend_from_slice(value);
            let ok = if j == origin {
                self.handle(j, &req);
                true
            } else {
                self.rpc(origin, j, req).is_some()
            };
            if ok {
                replicas.push(j);
            }
        }
        if replicas.is_empty() {
            return Err(DhtError::NoRoute);
        }
        Ok(StoreReceipt { replicas, hops: lookup.hops })
    }

    /// The record as stored, restricted or not.
    pub fn lookup_record(&mut self, key: &Key256) -> Result<(Record, u32), DhtError> {
        let origin = self.gateway()?;
        if let Some(r) = self.nodes[origin].store.get(key) {
            return Ok((r.clone(), 0));
        }
        match self.iterate(origin, key, true) {
            (l, Some(r)) => Ok((r, l.hops)),
            _ => Err(DhtError::NotFound),
        }
    }

    pub fn lookup(&mut self, key: &Key256) -> Result<(Vec<u8>, u32), DhtError> {
        let (r, hops) = self.lookup_record(key)?;
        if r.flags & FLAG_RESTRICTED != 0 {
            return Err(DhtError::Restricted);
        }
        Ok((r.value, hops))
    }

    fn broadcast_to_holders(&mut self, key: &Key256, req: Vec<u8>) -> Vec<usize> {
        let holders: Vec<usize> = (0..self.len()).filter(|&i| self.nodes[i].store.contains_key(key)).collect();
        let Ok(origin) = self.gateway() else {
            return vec![];
        };
        let mut hit = Vec::new();
        for j in holders {
            let resp = if j == origin { Some(self.handle(j, &req)) } else { self.rpc(origin, j, req.clone()) };
            if resp.as_deref() == Some(&[1]) {
                hit.push(j);
            }
        }
        hit
    }

    /// Removes `key` from every live replica; returns where it was dropped.
    pub fn delete(&mut self, key: &Key256) -> Vec<usize> {
        let mut req = vec![RPC_DELETE];
        req.extend_from_slice(&key.0);
        self.broadcast_to_holders(key, req)
    }

    /// Sets or clears the restricted flag on every live replica.
    pub fn set_restricted(&mut self, key: &Key256, restricted: bool) -> Vec<usize> {
        let Some(flags) = self.nodes.iter().find_map(|n| n.store.get(key)).map(|r| r.flags) else {
            return vec![];
        };
        let flags = if restricted { flags | FLAG_RESTRICTED } else { flags & !FLAG_RESTRICTED };
        let mut req = vec![RPC_FLAGS];
        req.extend_from_slice(&key.0);
        req.push(flags);
        self.broadcast_to_holders(key, req)
    }

    /// Removes a record from the network without going through a node;
    /// used to roll back a store whose ledger half failed.
    pub(crate) fn rollback(&mut self, key: &Key256) {
        for node in &mut self.nodes {
            if node.store.remove(key).is_some() {
                node.persist();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn net(seed: u64) -> (DhtNetwork, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (DhtNetwork::random(32, DhtConfig::default(), &mut rng), rng)
    }

    #[test]
    fn round_trip_and_not_found() {
        let (mut d, _) = net(1);
        let k = Key256::from_name("hello");
        let r = d.store(k, b"world", 0).unwrap();
        assert_eq!(r.replicas.len(), REPLICATION);
        assert_eq!(d.lookup(&k).unwrap().0, b"world");
        assert_eq!(d.lookup(&Key256::from_name("absent")), Err(DhtError::NotFound));
        assert_eq!(d.channel().bystander_opens(), 0);
    }

    #[test]
    fn hop_bound() {
        let (mut d, mut rng) = net(2);
        let mut worst = 0;
        for i in 0..500 {
            let k = Key256::random(&mut rng);
            let origin = i % d.len();
            worst = worst.max(d.find_node(origin, &k).hops);
        }
        assert!(worst <= 7, "worst hop count {worst}");
    }

    #[test]
    fn replicas_come_from_xor_neighbourhood() {
        let (mut d, mut rng) = net(3);
        for _ in 0..20 {
            let k = Key256::random(&mut rng);
            let r = d.store(k, b"v", 0).unwrap();
            let mut all: Vec<usize> = (0..d.len()).collect();
            all.sort_by_key(|&j| xor_distance(&d.node(j).info.id, &k));
            for j in r.replicas {
                assert!(all[..K_BUCKET].contains(&j));
            }
        }
    }

    #[test]
    fn lambda_zero_places_on_xor_closest() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let cfg = DhtConfig { lambda: 0.0, ..DhtConfig::default() };
        let mut d = DhtNetwork::random(32, cfg, &mut rng);
        for _ in 0..20 {
            let k = Key256::random(&mut rng);
            let mut r = d.store(k, b"v", 0).unwrap().replicas;
            let mut all: Vec<usize> = (0..d.len()).collect();
            all.sort_by_key(|&j| xor_distance(&d.node(j).info.id, &k));
            r.sort_by_key(|&j| xor_distance(&d.node(j).info.id, &k));
            assert_eq!(r, all[..REPLICATION].to_vec());
        }
    }

    #[test]
    fn survives_churn_and_restart() {
        let (mut d, mut rng) = net(5);
        let keys: Vec<Key256> = (0..40).map(|i| Key256::from_name(&format!("k{i}"))).collect();
        let mut replicas = Vec::new();
        for k in &keys {
            replicas.push(d.store(*k, k.to_hex().as_bytes(), 0).unwrap().replicas);
        }
        for _ in 0..10 {
            // Kill one replica of a random key plus a few bystanders, keeping
            // every key with a live majority of replicas.
            let victim = *replicas.choose(&mut rng).unwrap().choose(&mut rng).unwrap();
            let mut killed = vec![victim];
            for cand in 0..d.len() {
                if killed.len() >= 4 {
                    break;
                }
                let safe = replicas.iter().all(|r| r.iter().filter(|j| killed.contains(j) || **j == cand).count() <= 1);
                if !killed.contains(&cand) && safe && rng.gen_bool(0.3) {
                    killed.push(cand);
                }
            }
            for &j in &killed {
                d.kill(j);
            }
            for k in &keys {
                assert_eq!(d.lookup(k).unwrap().0, k.to_hex().as_bytes(), "key lost with {killed:?} down");
            }
            for &j in &killed {
                d.restart(j);
            }
        }
        // Restarted nodes serve from their store files.
        let j = replicas[0][0];
        let before = d.node(j).records().clone();
        d.kill(j);
        assert!(d.node(j).records().is_empty());
        d.restart(j);
        assert_eq!(d.node(j).records(), &before);
    }

    #[test]
    fn restrict_and_delete() {
        let (mut d, _) = net(6);
        let k = Key256::from_name("r");
        d.store(k, b"x", 0).unwrap();
        assert_eq!(d.set_restricted(&k, true).len(), REPLICATION);
        assert_eq!(d.lookup(&k), Err(DhtError::Restricted));
        d.set_restricted(&k, false);
        assert!(d.lookup(&k).is_ok());
        assert_eq!(d.delete(&k).len(), REPLICATION);
        assert_eq!(d.lookup(&k), Err(DhtError::NotFound));
        assert!(d.holders(&k).is_empty());
    }
}
