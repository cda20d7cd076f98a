//! The simulated network: nodes with deposits, one compute committee, the
//! ledger, the DHT and a logged secure channel between everyone.
//!
//! Party ids on the channel are node indices; the id one past the last node
//! is the client endpoint that data owners and requesters talk through.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::committee::{committee_weight, select_committee};
use super::trace::{ComputationTrace, FaultRecord, NodeTally, Outcome, Status};
use super::{Behavior, Detection, Mode, MpcError};
use crate::circuits::{layerize_with_floor, lower_select, Circuit, CircuitError, GateKind, LayerKind};
use crate::crypto::{hash, Key256, Keypair, PublicKey, Signer};
use crate::dht::{protocol_load, protocol_store, DhtConfig, DhtNetwork, NodeInfo};
use crate::field::{Fe, Field};
use crate::identity::{check_permission, lookup_acl, Predicate};
use crate::incentives::post_deposit;
use crate::ledger::{Ledger, Payload};
use crate::net::{Channel, CommitteeChannel, NetError, PartyId, SecureBroadcast};
use crate::spdz::{
    audit_trail, AuditVerdict, AuthShare, AuthSharing, CommitParams, Commitment, Preprocessing, PvEngine, PvShare,
    SpdzEngine, SpdzError, TrailWriter, TrustedDealer, WireId,
};
use crate::sss::{consistent, lagrange_at_zero, reconstruct, reshare_many, share, ReshareGroup, ShamirShare};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkConfig {
    pub nodes: usize,
    pub mode: Mode,
    pub committee: usize,
    /// Shamir privacy threshold; ignored by SPDZ.
    pub threshold: usize,
    /// Shamir party-reduction factor between multiplication layers.
    pub reduce: Option<usize>,
    pub field: Field,
    pub node_balance: u64,
    pub deposit: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nodes: 12,
            mode: Mode::Shamir,
            committee: 5,
            threshold: 2,
            reduce: None,
            field: Field::mersenne61(),
            node_balance: 1000,
            deposit: 100,
        }
    }
}

#[derive(Debug, Clone)]
enum Held {
    // The blinding share is kept so the node can later reopen its posted
    // commitment; nothing in the simulator asks it to yet.
    Shamir {
        value: ShamirShare,
        #[allow(dead_code)]
        randomness: Fe,
    },
    Spdz { value: AuthShare, randomness: AuthShare },
}

pub struct SimNode {
    pub keys: Keypair,
    pub info: NodeInfo,
    pub behavior: Behavior,
    held: BTreeMap<Key256, Held>,
}

impl SimNode {
    pub fn public_key(&self) -> PublicKey {
        self.keys.public_key()
    }

    pub fn holds(&self, share: &Key256) -> bool {
        self.held.contains_key(share)
    }
}

/// What the DHT stores for a shared input: enough to find the shares, none
/// of the secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareRef {
    pub id: Key256,
    pub mode: Mode,
    pub dealer: PublicKey,
    pub epoch: u64,
}

impl ShareRef {
    pub fn to_text(&self) -> String {
        format!("share id={} mode={} dealer={} epoch={}", self.id.to_hex(), self.mode, self.dealer.to_hex(), self.epoch)
    }

    pub fn parse(text: &str) -> Option<ShareRef> {
        let rest = text.strip_prefix("share ")?;
        let kv: BTreeMap<&str, &str> = rest.split_whitespace().filter_map(|p| p.split_once('=')).collect();
        Some(ShareRef {
            id: Key256::from_hex(kv.get("id")?).ok()?,
            mode: kv.get("mode")?.parse().ok()?,
            dealer: PublicKey::from_hex(kv.get("dealer")?).ok()?,
            epoch: kv.get("epoch")?.parse().ok()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ComputeOutcome {
    pub computation: Key256,
    pub trace: ComputationTrace,
    /// Delivered to the requester only when no fault stood in the way.
    pub outputs: Option<Vec<Fe>>,
    /// `(node index, detection)` for every fault noticed.
    pub faults: Vec<(usize, Detection)>,
    /// Traffic of the evaluation proper, before outputs are delivered.
    pub eval_messages: u64,
    pub eval_rounds: u64,
}

impl ComputeOutcome {
    pub fn status(&self) -> Status {
        self.trace.outcome.as_ref().map_or(Status::Aborted, |o| o.status)
    }
}

struct EvalResult {
    outputs: Option<Vec<Fe>>,
    faults: Vec<(usize, Detection)>,
    /// `(adds, muls)` per node index.
    work: BTreeMap<usize, (u64, u64)>,
    eval_messages: u64,
    eval_rounds: u64,
}

pub struct Network {
    cfg: NetworkConfig,
    ledger: Ledger,
    dht: DhtNetwork,
    controller: Keypair,
    nodes: Vec<SimNode>,
    net: SecureBroadcast,
    committee: Vec<usize>,
    epoch: u64,
    dealer: Option<TrustedDealer<ChaCha20Rng>>,
    rng: ChaCha20Rng,
    counter: u64,
}

impl Network {
    /// Builds the network, funds and bonds every node, and samples the
    /// compute committee from the nodes holding a deposit.
    pub fn new(cfg: NetworkConfig, genesis: &[(PublicKey, u64)], seed: u64) -> Result<Network, MpcError> {
        if cfg.mode == Mode::Shamir && 2 * cfg.threshold >= cfg.committee {
            return Err(MpcError::HonestMajorityViolated { t: cfg.threshold, n: cfg.committee });
        }
        if cfg.mode == Mode::Spdz && cfg.committee < 2 {
            return Err(SpdzError::TooFewParties(cfg.committee).into());
        }
        cfg.field.check_parties(cfg.committee).map_err(crate::sss::SssError::from)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let controller = Keypair::generate(&mut rng);
        let keys: Vec<Keypair> = (0..cfg.nodes).map(|_| Keypair::generate(&mut rng)).collect();
        let mut balances: Vec<(PublicKey, u64)> = genesis.to_vec();
        balances.extend(keys.iter().map(|k| (k.public_key(), cfg.node_balance)));
        let mut ledger = Ledger::new(controller.public_key(), &balances);
        if cfg.deposit > 0 {
            for k in &keys {
                post_deposit(k, cfg.deposit, &mut ledger)?;
            }
        }
        let infos: Vec<NodeInfo> = keys.iter().map(|k| NodeInfo::new(k.public_key().digest())).collect();
        let dht = DhtNetwork::bootstrap(infos.clone(), DhtConfig::default(), &mut rng);
        let net = SecureBroadcast::new(0..=cfg.nodes, &mut rng).with_logs();
        let nodes: Vec<SimNode> = keys
            .into_iter()
            .zip(infos)
            .map(|(keys, info)| SimNode { keys, info, behavior: Behavior::Honest, held: BTreeMap::new() })
            .collect();
        let mut netw = Network {
            cfg,
            ledger,
            dht,
            controller,
            nodes,
            net,
            committee: Vec::new(),
            epoch: 0,
            dealer: None,
            rng,
            counter: 0,
        };
        let candidates = netw.candidates(&BTreeSet::new());
        netw.committee = select_committee(&candidates, cfg.committee, &mut netw.rng)?;
        netw.fresh_dealer()?;
        Ok(netw)
    }

    fn candidates(&self, exclude: &BTreeSet<usize>) -> Vec<(PartyId, f64)> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| {
                !exclude.contains(i) && !self.net.is_offline(*i) && self.ledger.account(&n.public_key()).deposit > 0
            })
            .map(|(i, n)| (i, committee_weight(&n.info)))
            .collect()
    }

    fn fresh_dealer(&mut self) -> Result<(), MpcError> {
        self.dealer = match self.cfg.mode {
            Mode::Spdz => Some(TrustedDealer::new(
                self.cfg.field,
                self.committee.len(),
                ChaCha20Rng::seed_from_u64(self.rng.gen()),
            )?),
            Mode::Shamir => None,
        };
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut Ledger {
        &mut self.ledger
    }

    pub fn dht(&self) -> &DhtNetwork {
        &self.dht
    }

    /// Ledger and DHT together, for the storage protocols.
    pub fn stores(&mut self) -> (&mut Ledger, &mut DhtNetwork) {
        (&mut self.ledger, &mut self.dht)
    }

    pub fn controller(&self) -> &Keypair {
        &self.controller
    }

    pub fn nodes(&self) -> &[SimNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &SimNode {
        &self.nodes[i]
    }

    pub fn set_behavior(&mut self, node: usize, b: Behavior) {
        self.nodes[node].behavior = b;
    }

    /// Node indices of the compute committee, in seat order.
    pub fn committee(&self) -> &[usize] {
        &self.committee
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Channel id of the client endpoint.
    pub fn client(&self) -> PartyId {
        self.nodes.len()
    }

    pub fn channel(&self) -> &SecureBroadcast {
        &self.net
    }

    pub fn messages_sent(&self) -> u64 {
        self.net.messages_sent()
    }

    /// Swaps `node` out of the committee for a freshly sampled one. Shares
    /// dealt to the old committee become stale.
    pub fn replace_member(&mut self, node: usize) -> Result<usize, MpcError> {
        let seat = self.committee.iter().position(|&m| m == node).ok_or(MpcError::Mismatch(format!("node {node} is not on the committee")))?;
        let mut exclude: BTreeSet<usize> = self.committee.iter().copied().collect();
        exclude.insert(node);
        let candidates = self.candidates(&exclude);
        let fresh = select_committee(&candidates, 1, &mut self.rng)?[0];
        self.committee[seat] = fresh;
        self.epoch += 1;
        self.fresh_dealer()?;
        Ok(fresh)
    }

    /// Secret-shares `x` to the committee and stores the share pointer under
    /// the owner's identity, readable by whoever satisfies `q_compute`.
    /// Returns the pointer's address.
    pub fn protocol_share(
        &mut self,
        owner: &Keypair,
        addr: &Key256,
        x: Fe,
        q_compute: &Predicate,
    ) -> Result<Key256, MpcError> {
        let pk = owner.public_key();
        let q_store = lookup_acl(addr, &self.ledger).and_then(|a| a.policy(&pk).cloned()).ok_or(MpcError::Denied)?;
        if !check_permission(&pk, addr, &q_store, &self.ledger) {
            return Err(MpcError::Denied);
        }
        self.counter += 1;
        let id = hash(&[b"share", &addr.0, &pk.0, &self.counter.to_be_bytes()]);
        let field = self.cfg.field;
        let client = self.client();
        let members = self.committee.clone();
        match self.cfg.mode {
            Mode::Shamir => {
                let (t, n) = (self.cfg.threshold, members.len());
                let s = share(x, t, n, &mut self.rng)?;
                let r = share(field.random(&mut self.rng), t, n, &mut self.rng)?;
                let params = CommitParams::for_field(field)?;
                let comms: Vec<Commitment> = s.iter().zip(&r).map(|(s, r)| params.commit(s.value, r.value)).collect();
                let key = hash(&[b"vss", &id.0]);
                let body = serde_json::to_vec(&comms).expect("commitments serialize");
                self.ledger.submit(owner, Payload::CommitmentPost { key, value: body })?;
                for (j, &m) in members.iter().enumerate() {
                    let mut msg = s[j].value.to_bytes().to_vec();
                    msg.extend_from_slice(&r[j].value.to_bytes());
                    self.net.send(client, m, msg);
                }
                self.net.end_round();
                for (j, &m) in members.iter().enumerate() {
                    let msg = self.net.recv(client, m)?;
                    let bad = MpcError::BadInputShare { node: m };
                    if msg.len() != 16 {
                        return Err(bad);
                    }
                    let value = field.decode(&msg[..8]).map_err(|_| bad.clone())?;
                    let randomness = field.decode(&msg[8..]).map_err(|_| bad.clone())?;
                    // The node checks its pair against the posted commitment.
                    let posted: Vec<Commitment> =
                        self.ledger.get(&key).and_then(|b| serde_json::from_slice(b).ok()).ok_or(bad.clone())?;
                    if !params.verify_open(posted[j], value, randomness) {
                        return Err(bad);
                    }
                    let value = ShamirShare { index: j as u64 + 1, value, threshold: t };
                    self.nodes[m].held.insert(id, Held::Shamir { value, randomness });
                }
            }
            Mode::Spdz => {
                let dealer = self.dealer.as_mut().expect("SPDZ network has a dealer");
                let alpha = dealer.alpha_shares();
                // The owner learns the mask r; the nodes hold <r>.
                let r = field.random(&mut self.rng);
                let mask = dealer.input(r);
                let rho = dealer.input(field.random(&mut self.rng));
                let eps = x - r;
                for &m in &members {
                    self.net.send(client, m, eps.to_bytes().to_vec());
                }
                self.net.end_round();
                for (j, &m) in members.iter().enumerate() {
                    let msg = self.net.recv(client, m)?;
                    let eps = field.decode(&msg).map_err(|_| MpcError::BadInputShare { node: m })?;
                    let mut value = mask.shares[j];
                    if j == 0 {
                        value.value += eps;
                    }
                    value.mac += alpha[j] * eps;
                    self.nodes[m].held.insert(id, Held::Spdz { value, randomness: rho.shares[j] });
                }
            }
        }
        let xref = ShareRef { id, mode: self.cfg.mode, dealer: pk, epoch: self.epoch };
        protocol_store(owner, addr, xref.to_text().as_bytes(), Some(q_compute), &mut self.ledger, &mut self.dht)
            .ok_or(MpcError::Denied)
    }

    fn load_ref(&mut self, reader: &Keypair, addr: &Key256, pointer: &Key256) -> Result<ShareRef, MpcError> {
        let raw = protocol_load(reader, addr, pointer, &self.ledger, &mut self.dht).ok_or(MpcError::Denied)?;
        let r = std::str::from_utf8(&raw).ok().and_then(ShareRef::parse).ok_or(MpcError::StaleShares)?;
        if r.epoch != self.epoch || r.mode != self.cfg.mode {
            return Err(MpcError::StaleShares);
        }
        Ok(r)
    }

    /// Returns the plaintext of a shared input, to its original dealer only.
    pub fn declassify(&mut self, requester: &Keypair, addr: &Key256, pointer: &Key256) -> Result<Fe, MpcError> {
        let r = self.load_ref(requester, addr, pointer)?;
        if r.dealer != requester.public_key() {
            return Err(MpcError::Denied);
        }
        let client = self.client();
        let members = self.committee.clone();
        for &m in &members {
            let v = match self.nodes[m].held.get(&r.id).ok_or(MpcError::StaleShares)? {
                Held::Shamir { value, .. } => value.value,
                Held::Spdz { value, .. } => value.value,
            };
            self.net.send(m, client, v.to_bytes().to_vec());
        }
        self.net.end_round();
        let field = self.cfg.field;
        let mut got = Vec::with_capacity(members.len());
        for (j, &m) in members.iter().enumerate() {
            let v = field.decode(&self.net.recv(m, client)?).map_err(|_| MpcError::BadInputShare { node: m })?;
            got.push(ShamirShare { index: j as u64 + 1, value: v, threshold: self.cfg.threshold });
        }
        Ok(match self.cfg.mode {
            Mode::Shamir => reconstruct(&got)?,
            Mode::Spdz => field.sum(got.iter().map(|s| s.value)),
        })
    }

    /// Evaluates `circuit` on the inputs behind `pointers`, in order. Every
    /// pointer must be readable by `requester`; otherwise nothing is sent.
    pub fn protocol_compute(
        &mut self,
        requester: &Keypair,
        addr: &Key256,
        pointers: &[Key256],
        circuit: &Circuit,
    ) -> Result<ComputeOutcome, MpcError> {
        let refs: Vec<ShareRef> =
            pointers.iter().map(|p| self.load_ref(requester, addr, p)).collect::<Result<_, _>>()?;
        let arity = circuit.inputs().len();
        if arity != refs.len() {
            return Err(CircuitError::ArityMismatch { expected: arity, got: refs.len() }.into());
        }
        for r in &refs {
            if self.committee.iter().any(|&m| !self.nodes[m].holds(&r.id)) {
                return Err(MpcError::StaleShares);
            }
        }
        self.counter += 1;
        let rpk = requester.public_key();
        let computation = hash(&[b"computation", &rpk.0, &self.counter.to_be_bytes()]);
        let members = self.committee.clone();
        let before: Vec<usize> = members.iter().map(|m| self.active_rounds(*m)).collect();
        let ids: Vec<Key256> = refs.iter().map(|r| r.id).collect();
        let mut trace = ComputationTrace::new(computation, rpk, self.cfg.mode);
        let res = match self.cfg.mode {
            Mode::Shamir => self.eval_shamir(&ids, circuit, &mut trace),
            Mode::Spdz => self.eval_spdz(computation, &ids, circuit, &mut trace),
        };
        // An abort leaves messages nobody will read; they must not leak into
        // the next computation.
        let dropped = self.net.discard_pending();
        if dropped > 0 {
            trace.event(format!("dropped {dropped} unread messages"));
        }
        let res = res?;
        for (seat, &m) in members.iter().enumerate() {
            let (adds, muls) = res.work.get(&m).copied().unwrap_or_default();
            let rounds = (self.active_rounds(m) - before[seat]) as u64;
            trace.nodes.push(NodeTally { pk: self.nodes[m].public_key(), rounds, adds, muls });
        }
        for &(m, channel) in &res.faults {
            trace.faults.push(FaultRecord { pk: self.nodes[m].public_key(), behavior: self.nodes[m].behavior, channel });
        }
        let status = match (&res.outputs, res.faults.is_empty()) {
            (Some(_), true) => Status::Ok,
            (Some(_), false) => Status::Recovered,
            (None, _) if res.faults.iter().any(|f| f.1 == Detection::Timeout) => Status::Aborted,
            (None, _) => Status::CheatDetected,
        };
        let outputs = res.outputs.as_ref().map(|v| v.iter().map(Fe::value).collect()).unwrap_or_default();
        trace.outcome = Some(Outcome { status, outputs });
        Ok(ComputeOutcome {
            computation,
            trace,
            outputs: res.outputs,
            faults: res.faults,
            eval_messages: res.eval_messages,
            eval_rounds: res.eval_rounds,
        })
    }

    fn active_rounds(&self, node: usize) -> usize {
        self.net.stats().active.get(&node).map_or(0, BTreeSet::len)
    }

    fn input_shares(&self, id: &Key256, members: &[usize]) -> Vec<Held> {
        members.iter().map(|m| self.nodes[*m].held[id].clone()).collect()
    }

    fn eval_shamir(&mut self, ids: &[Key256], circuit: &Circuit, trace: &mut ComputationTrace) -> Result<EvalResult, MpcError> {
        let field = self.cfg.field;
        let t = self.cfg.threshold;
        let mut members = self.committee.clone();
        let n = members.len();
        let lc = match self.cfg.reduce {
            Some(c) => layerize_with_floor(circuit, n, c, 2 * t + 1)?,
            None => {
                let mut lc = layerize_with_floor(circuit, n, 2, 0)?;
                lc.schedule.iter_mut().for_each(|s| *s = n);
                lc
            }
        };
        trace.event(format!("schedule {:?}", lc.schedule).replace(' ', ""));
        let gates = lc.circuit.gates();
        let mut last_use = vec![0usize; gates.len()];
        for (li, layer) in lc.layers.iter().enumerate() {
            for &g in &layer.gates {
                for op in gates[g].kind.operands() {
                    last_use[op] = last_use[op].max(li);
                }
            }
        }
        let out_wires: Vec<usize> = lc
            .circuit
            .outputs()
            .into_iter()
            .map(|o| match gates[o].kind {
                GateKind::Output(a) => a,
                _ => unreachable!(),
            })
            .collect();
        for &w in &out_wires {
            last_use[w] = usize::MAX;
        }

        let mut wires: Vec<Option<Vec<ShamirShare>>> = vec![None; gates.len()];
        for (g, id) in lc.circuit.inputs().into_iter().zip(ids) {
            let shares = self
                .input_shares(id, &members)
                .into_iter()
                .map(|h| match h {
                    Held::Shamir { value, .. } => Ok(value),
                    Held::Spdz { .. } => Err(MpcError::StaleShares),
                })
                .collect::<Result<Vec<_>, _>>()?;
            wires[g] = Some(shares);
        }

        let mut work: BTreeMap<usize, (u64, u64)> = BTreeMap::new();
        let sent0 = self.net.messages_sent();
        let rounds0 = self.net.stats().rounds.len();
        for (li, layer) in lc.layers.iter().enumerate() {
            let get = |wires: &[Option<Vec<ShamirShare>>], g: usize| wires[g].clone().expect("operand evaluated");
            match layer.kind {
                LayerKind::Add => {
                    for &g in &layer.gates {
                        let out: Vec<ShamirShare> = match gates[g].kind {
                            GateKind::Add(a, b) => get(&wires, a)
                                .iter()
                                .zip(&get(&wires, b))
                                .map(|(x, y)| ShamirShare { value: x.value + y.value, ..*x })
                                .collect(),
                            GateKind::ScalarMul(k, a) => get(&wires, a)
                                .iter()
                                .map(|x| ShamirShare { value: field.from_i128(k) * x.value, ..*x })
                                .collect(),
                            _ => unreachable!("add layers hold linear gates"),
                        };
                        wires[g] = Some(out);
                    }
                    for &m in &members {
                        work.entry(m).or_default().0 += layer.gates.len() as u64;
                    }
                }
                LayerKind::Mul => {
                    let next = lc.schedule[layer.depth];
                    let target: Vec<usize> = members[..next].to_vec();
                    let indices: Vec<u64> = (1..=members.len() as u64).collect();
                    let lambda = lagrange_at_zero(field, &indices)?;
                    let mut jobs = Vec::new();
                    let mut dest = Vec::new();
                    for &g in &layer.gates {
                        let GateKind::Mul(a, b) = gates[g].kind else { unreachable!("mul layers hold products") };
                        let (x, y) = (get(&wires, a), get(&wires, b));
                        jobs.push(ReshareGroup {
                            sources: members.iter().zip(x.iter().zip(&y)).map(|(m, (x, y))| (*m, x.value * y.value)).collect(),
                            weights: lambda.clone(),
                            recipients: target.clone(),
                            t_out: t,
                        });
                        dest.push(g);
                    }
                    if next < members.len() {
                        for w in 0..gates.len() {
                            if last_use[w] > li && wires[w].is_some() {
                                jobs.push(ReshareGroup {
                                    sources: members.iter().zip(get(&wires, w)).map(|(m, s)| (*m, s.value)).collect(),
                                    weights: lambda.clone(),
                                    recipients: target.clone(),
                                    t_out: t,
                                });
                                dest.push(w);
                            }
                        }
                        trace.event(format!("reduce parties={} to={} wires={}", members.len(), next, jobs.len() - layer.gates.len()));
                    }
                    for &m in &members {
                        work.entry(m).or_default().1 += layer.gates.len() as u64;
                    }
                    let results = reshare_many(&jobs, &mut self.net, &mut self.rng)?;
                    for w in 0..gates.len() {
                        if next < members.len() && wires[w].is_some() {
                            wires[w] = None;
                        }
                    }
                    for (g, shares) in dest.into_iter().zip(results) {
                        wires[g] = Some(shares);
                    }
                    members = target;
                }
            }
        }
        let eval_messages = self.net.messages_sent() - sent0;
        let eval_rounds = (self.net.stats().rounds.len() - rounds0) as u64;

        // Output delivery: each member sends its output shares to the client.
        let client = self.client();
        for (j, &m) in members.iter().enumerate() {
            let behavior = self.nodes[m].behavior;
            if behavior == Behavior::AbortAfterOutput {
                self.net.set_offline(m);
                continue;
            }
            let mut msg = Vec::with_capacity(8 * out_wires.len());
            for &w in &out_wires {
                let mut v = wires[w].as_ref().expect("output evaluated")[j].value;
                if behavior == Behavior::WrongShare {
                    v += field.one();
                }
                msg.extend_from_slice(&v.to_bytes());
            }
            self.net.send(m, client, msg);
        }
        self.net.end_round();
        let mut faults = Vec::new();
        let mut received: Vec<(usize, Vec<ShamirShare>)> = Vec::new();
        for (j, &m) in members.iter().enumerate() {
            match self.net.recv(m, client) {
                Ok(msg) if msg.len() == 8 * out_wires.len() => {
                    let vals = msg
                        .chunks(8)
                        .map(|c| field.decode(c).map(|value| ShamirShare { index: j as u64 + 1, value, threshold: t }))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| MpcError::BadInputShare { node: m })?;
                    received.push((m, vals));
                }
                Ok(_) => return Err(MpcError::BadInputShare { node: m }),
                Err(NetError::Timeout { .. }) => {
                    trace.event(format!("timeout node={m} stage=output"));
                    faults.push((m, Detection::Timeout));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let per_output = |rcv: &[(usize, Vec<ShamirShare>)], k: usize| -> Vec<ShamirShare> {
            rcv.iter().map(|(_, v)| v[k]).collect()
        };
        let all_consistent = |rcv: &[(usize, Vec<ShamirShare>)]| -> Result<bool, MpcError> {
            for k in 0..out_wires.len() {
                if !consistent(&per_output(rcv, k), t)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let mut usable = Some(received.clone());
        if received.len() <= t {
            trace.event(format!("only {} output shares, need {}", received.len(), t + 1));
            usable = None;
        } else if !all_consistent(&received)? {
            // Leave-one-out: a culprit is identified when dropping exactly
            // one sender restores consistency.
            let mut culprits = Vec::new();
            if received.len() > t + 2 {
                for skip in 0..received.len() {
                    let rest: Vec<_> = received.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, r)| r.clone()).collect();
                    if all_consistent(&rest)? {
                        culprits.push(skip);
                    }
                }
            }
            if culprits.len() == 1 {
                let m = received[culprits[0]].0;
                trace.event(format!("inconsistent output share from node={m}"));
                faults.push((m, Detection::ShareConsistency));
                usable = Some(received.iter().filter(|r| r.0 != m).cloned().collect());
            } else {
                trace.event("inconsistent output shares, sender not identifiable");
                usable = None;
            }
        }
        let outputs = match usable {
            Some(rcv) => Some((0..out_wires.len()).map(|k| reconstruct(&per_output(&rcv, k))).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        Ok(EvalResult { outputs, faults, work, eval_messages, eval_rounds })
    }

    fn eval_spdz(
        &mut self,
        computation: Key256,
        ids: &[Key256],
        circuit: &Circuit,
        trace: &mut ComputationTrace,
    ) -> Result<EvalResult, MpcError> {
        let field = self.cfg.field;
        let members = self.committee.clone();
        let inputs: Vec<Vec<Held>> = ids.iter().map(|id| self.input_shares(id, &members)).collect();
        let lowered = lower_select(circuit);
        let gates = lowered.gates();
        let Network { ledger, nodes, net, dealer, rng, controller, .. } = self;
        let dealer = dealer.as_mut().expect("SPDZ network has a dealer");
        let signers: Vec<&dyn Signer> = members.iter().map(|&m| &nodes[m].keys as &dyn Signer).collect();
        let mut trail = TrailWriter::begin(ledger, computation, controller, signers, field)?;
        for (seat, &m) in members.iter().enumerate() {
            if nodes[m].behavior == Behavior::BrokenCommitment {
                trail.set_broken_commitment(seat + 1);
            }
        }
        let params = trail.params();
        let mut eng = PvEngine::new(SpdzEngine::new(field, dealer.alpha_shares()), trail);
        let mut ch = CommitteeChannel::new(net, &members);
        let sent0 = ch.messages_sent();
        let rounds0 = ch.stats().rounds.len();

        let mut wires: Vec<Option<PvShare>> = vec![None; gates.len()];
        for (g, held) in lowered.inputs().into_iter().zip(inputs) {
            let (mut vs, mut rs) = (Vec::new(), Vec::new());
            for h in held {
                match h {
                    Held::Spdz { value, randomness } => {
                        vs.push(value);
                        rs.push(randomness);
                    }
                    Held::Shamir { .. } => return Err(MpcError::StaleShares),
                }
            }
            let (value, randomness) = (AuthSharing { shares: vs }, AuthSharing { shares: rs });
            let commitments: Vec<Commitment> =
                value.shares.iter().zip(&randomness.shares).map(|(s, r)| params.commit(s.value, r.value)).collect();
            let wire = eng.trail_mut().fresh_wire();
            eng.trail_mut().post_commit(wire, &commitments)?;
            wires[g] = Some(PvShare { wire, value, randomness, commitments });
        }
        let (one, zero) = (field.one(), field.zero());
        let mut outs: Vec<&PvShare> = Vec::new();
        let (mut adds, mut muls) = (0u64, 0u64);
        for (g, gate) in gates.iter().enumerate() {
            let w = |i: usize| wires[i].as_ref().expect("operand evaluated");
            let v = match gate.kind {
                GateKind::Input => continue,
                GateKind::Add(a, b) => {
                    adds += 1;
                    eng.linear(&[(one, w(a)), (one, w(b))], zero)?
                }
                GateKind::ScalarMul(k, a) => {
                    adds += 1;
                    eng.linear(&[(field.from_i128(k), w(a))], zero)?
                }
                GateKind::Mul(a, b) => {
                    muls += 1;
                    let mut triple = eng.triple(dealer, rng)?;
                    eng.mul(w(a), w(b), &mut triple, &mut ch)?
                }
                GateKind::Output(_) | GateKind::Select(..) => continue,
            };
            wires[g] = Some(v);
        }
        for o in lowered.outputs() {
            if let GateKind::Output(a) = gates[o].kind {
                outs.push(wires[a].as_ref().expect("output evaluated"));
            }
        }
        let eval_messages = ch.messages_sent() - sent0;
        let eval_rounds = (ch.stats().rounds.len() - rounds0) as u64;

        let mut opened: Vec<(WireId, Fe)> = Vec::new();
        for x in outs {
            let mut x = x.clone();
            for (seat, &m) in members.iter().enumerate() {
                if nodes[m].behavior == Behavior::WrongShare {
                    x.value.shares[seat].value += one;
                }
            }
            let v = eng.open(&x, &mut ch)?;
            opened.push((x.wire, v));
        }
        for (seat, &m) in members.iter().enumerate() {
            if nodes[m].behavior == Behavior::AbortAfterOutput {
                ch.set_offline(seat + 1);
            }
        }
        let mut faults = Vec::new();
        let mac_ok = match eng.mac_check(&mut ch, rng) {
            Ok(()) => true,
            Err(SpdzError::CheatDetected { batch }) => {
                trace.event(format!("mac check failed batch={batch}"));
                false
            }
            Err(SpdzError::MissingParty(seat)) => {
                let m = members[seat - 1];
                trace.event(format!("timeout node={m} stage=mac_check"));
                faults.push((m, Detection::Timeout));
                false
            }
            Err(e) => return Err(e.into()),
        };
        eng.finish(&opened)?;

        let work = members.iter().map(|&m| (m, (adds, muls))).collect();
        let verdict = audit_trail(ledger.log(), &computation, None);
        match verdict {
            Ok(AuditVerdict::Pass { .. }) => trace.event("audit pass"),
            Ok(AuditVerdict::Fail { guilty, output_mismatch }) => {
                let seats: Vec<String> = guilty.iter().map(usize::to_string).collect();
                trace.event(format!("audit fail guilty={} output_mismatch={output_mismatch}", seats.join(",")));
                let channel = if mac_ok { Detection::AuditTrail } else { Detection::MacCheck };
                for seat in guilty {
                    let m = members[seat - 1];
                    if !faults.iter().any(|f: &(usize, Detection)| f.0 == m) {
                        faults.push((m, channel));
                    }
                }
            }
            Err(e) => trace.event(format!("audit error: {e}")),
        }
        let outputs = mac_ok.then(|| opened.iter().map(|(_, v)| *v).collect());
        Ok(EvalResult { outputs, faults, work, eval_messages, eval_rounds })
    }
}
