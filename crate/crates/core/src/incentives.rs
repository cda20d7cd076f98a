//! Deposits, computation fees, slashing and storage rent.
//!
//! All money moves through controller-signed `FeeSettlement` transactions,
//! which the ledger applies atomically.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::crypto::{hash, Key256, Keypair, PublicKey, Signer};
use crate::dht::DhtNetwork;
use crate::ledger::{Ledger, LedgerError, Movement, Payload, Receipt};
use crate::mpc::{ComputationTrace, NodeTally};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeeSchedule {
    pub w_round: u64,
    pub w_add: u64,
    pub w_mul: u64,
    /// Requesters below this balance are turned away.
    pub min_balance: u64,
    /// Rent per byte per tick.
    pub storage_price: u64,
    /// Ticks a restricted record survives before deletion.
    pub grace: u64,
}

impl Default for FeeSchedule {
    fn default() -> Self {
        Self { w_round: 1, w_add: 1, w_mul: 10, min_balance: 10, storage_price: 1, grace: 3 }
    }
}

impl FeeSchedule {
    pub fn node_fee(&self, t: &NodeTally) -> u64 {
        self.w_round * t.rounds + self.w_add * t.adds + self.w_mul * t.muls
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SettleError {
    #[error("computation trace has no outcome; refusing to settle")]
    NotFinalized,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Moves `amount` from the node's balance into its deposit. A node with a
/// zero deposit stays ineligible for committees.
pub fn post_deposit(node: &Keypair, amount: u64, ledger: &mut Ledger) -> Result<Receipt, LedgerError> {
    ledger.submit(node, Payload::Deposit { amount })
}

pub fn is_eligible(pk: &PublicKey, ledger: &Ledger) -> bool {
    ledger.account(pk).deposit > 0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettlementLine {
    pub node: PublicKey,
    /// Paid to the node; negative for the requester.
    pub fee: i128,
    /// Slashed deposit moved: forfeited by a faulty node, received by an
    /// honest one.
    pub slash: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettlementReport {
    pub computation: Key256,
    pub rejected: bool,
    pub lines: Vec<SettlementLine>,
}

impl SettlementReport {
    pub fn total_fees(&self) -> u64 {
        self.lines.iter().filter(|l| l.fee > 0).map(|l| l.fee as u64).sum()
    }

    pub fn line(&self, pk: &PublicKey) -> Option<&SettlementLine> {
        self.lines.iter().find(|l| &l.node == pk)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "node={} fee={} slash={} reason={}", l.node.to_hex(), l.fee, l.slash, l.reason);
        }
        s
    }
}

/// Pays honest participants from the requester and splits every faulty
/// node's deposit among them. A requester below `min_balance` or unable to
/// cover the fees is rejected and pays nothing; slashing applies anyway.
pub fn settle_computation(
    trace: &ComputationTrace,
    schedule: &FeeSchedule,
    controller: &Keypair,
    ledger: &mut Ledger,
) -> Result<SettlementReport, SettleError> {
    if !trace.is_finalized() {
        return Err(SettleError::NotFinalized);
    }
    let honest: Vec<&NodeTally> = trace.nodes.iter().filter(|n| !trace.is_faulty(&n.pk)).collect();
    let fees: Vec<u64> = honest.iter().map(|n| schedule.node_fee(n)).collect();
    let total: u64 = fees.iter().sum();
    let balance = ledger.account(&trace.requester).balance;
    let rejected = balance < schedule.min_balance || balance < total;

    let mut movements = Vec::new();
    let mut received: BTreeMap<PublicKey, u64> = BTreeMap::new();
    let mut lines = Vec::new();
    let mut seen = Vec::new();
    for f in &trace.faults {
        if seen.contains(&f.pk) {
            continue;
        }
        seen.push(f.pk);
        let deposit = ledger.account(&f.pk).deposit;
        if deposit > 0 {
            if honest.is_empty() {
                movements.push(Movement::Slash { from: f.pk, to: controller.public_key(), amount: deposit });
            } else {
                let h = honest.len() as u64;
                let (q, rem) = (deposit / h, deposit % h);
                for (i, n) in honest.iter().enumerate() {
                    let amount = q + if i == 0 { rem } else { 0 };
                    if amount > 0 {
                        movements.push(Movement::Slash { from: f.pk, to: n.pk, amount });
                        *received.entry(n.pk).or_default() += amount;
                    }
                }
            }
        }
        lines.push(SettlementLine { node: f.pk, fee: 0, slash: deposit, reason: f.behavior.to_string() });
    }
    for (n, fee) in honest.iter().zip(&fees) {
        let paid = if rejected { 0 } else { *fee };
        if paid > 0 {
            movements.push(Movement::Pay { from: trace.requester, to: n.pk, amount: paid });
        }
        lines.push(SettlementLine {
            node: n.pk,
            fee: paid as i128,
            slash: received.get(&n.pk).copied().unwrap_or(0),
            reason: if rejected { "unpaid".into() } else { "honest".into() },
        });
    }
    let charged = if rejected { 0 } else { total };
    lines.push(SettlementLine {
        node: trace.requester,
        fee: -(charged as i128),
        slash: 0,
        reason: if rejected { "rejected".into() } else { "requester".into() },
    });
    let memo = format!("computation {}", trace.computation.to_hex());
    ledger.submit(controller, Payload::FeeSettlement { memo, movements })?;
    Ok(SettlementReport { computation: trace.computation, rejected, lines })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RentState {
    Active,
    Restricted { since: u64 },
    Deleted { at: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RentRecord {
    pub payer: PublicKey,
    pub size: u64,
    pub state: RentState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RentEvent {
    Paid { key: Key256, amount: u64 },
    Restricted { key: Key256 },
    Restored { key: Key256 },
    Deleted { key: Key256 },
}

/// Stored records that owe rent, and the rent clock.
#[derive(Debug, Clone, Default)]
pub struct RentBook {
    records: BTreeMap<Key256, RentRecord>,
    now: u64,
}

impl RentBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, key: Key256, payer: PublicKey, size: u64) {
        self.records.insert(key, RentRecord { payer, size, state: RentState::Active });
    }

    pub fn record(&self, key: &Key256) -> Option<&RentRecord> {
        self.records.get(key)
    }

    pub fn now(&self) -> u64 {
        self.now
    }
}

/// Ledger key marking a record deleted for unpaid rent.
pub fn deletion_key(key: &Key256) -> Key256 {
    hash(&[b"rent-deleted", &key.0])
}

/// Advances the clock by one tick and charges `price * size` per live
/// record, paid to the nodes currently holding it. `host_keys[i]` is the
/// account of DHT node `i`.
///
/// A payer who cannot cover the rent gets the record restricted; after
/// `grace` further ticks without payment it is deleted from the DHT and the
/// deletion is recorded on the ledger. Paying again while restricted
/// restores it.
pub fn storage_rent_tick(
    book: &mut RentBook,
    schedule: &FeeSchedule,
    controller: &Keypair,
    host_keys: &[PublicKey],
    ledger: &mut Ledger,
    dht: &mut DhtNetwork,
) -> Result<Vec<RentEvent>, LedgerError> {
    book.now += 1;
    let now = book.now;
    let mut events = Vec::new();
    let mut movements = Vec::new();
    let mut spent: BTreeMap<PublicKey, u64> = BTreeMap::new();
    let mut deletions = Vec::new();
    for (key, rec) in book.records.iter_mut() {
        if matches!(rec.state, RentState::Deleted { .. }) {
            continue;
        }
        let due = schedule.storage_price * rec.size;
        let available = ledger.account(&rec.payer).balance - spent.get(&rec.payer).copied().unwrap_or(0);
        if available >= due {
            *spent.entry(rec.payer).or_default() += due;
            let hosts: Vec<PublicKey> = dht.holders(key).into_iter().filter_map(|i| host_keys.get(i).copied()).collect();
            let hosts = if hosts.is_empty() { vec![controller.public_key()] } else { hosts };
            let h = hosts.len() as u64;
            for (i, to) in hosts.iter().enumerate() {
                let amount = due / h + if i == 0 { due % h } else { 0 };
                if amount > 0 {
                    movements.push(Movement::Pay { from: rec.payer, to: *to, amount });
                }
            }
            events.push(RentEvent::Paid { key: *key, amount: due });
            if let RentState::Restricted { .. } = rec.state {
                dht.set_restricted(key, false);
                rec.state = RentState::Active;
                events.push(RentEvent::Restored { key: *key });
            }
            continue;
        }
        match rec.state {
            RentState::Active => {
                dht.set_restricted(key, true);
                rec.state = RentState::Restricted { since: now };
                events.push(RentEvent::Restricted { key: *key });
            }
            RentState::Restricted { since } if now - since >= schedule.grace => {
                dht.delete(key);
                rec.state = RentState::Deleted { at: now };
                deletions.push(*key);
                events.push(RentEvent::Deleted { key: *key });
            }
            _ => {}
        }
    }
    if !movements.is_empty() {
        ledger.submit(controller, Payload::FeeSettlement { memo: format!("rent tick {now}"), movements })?;
    }
    for key in deletions {
        let value = format!("deleted at tick {now}").into_bytes();
        ledger.submit(controller, Payload::CommitmentPost { key: deletion_key(&key), value })?;
    }
    Ok(events)
}
