//! Simulated blockchain acting as the public bulletin board.
//!
//! Every accepted transaction lands at its own height and produces one or
//! more [`LedgerEntry`] records. Entries are never mutated or removed;
//! `get_at` reads the board as of any past height. A running hash chain over
//! the entries lets [`Ledger::verify_log`] pinpoint tampering.

mod dump;
mod log;

pub use dump::DumpError;
pub use log::{EntryLog, LedgerEntry};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash, verify, Key256, PublicKey, Signature, Signer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("signature does not verify under the sender key")]
    BadSignature,
    #[error("stale nonce {got}; last accepted was {last}")]
    StaleNonce { got: u64, last: u64 },
    #[error("insufficient balance: need {need}, have {have}")]
    InsufficientBalance { need: u64, have: u64 },
    #[error("insufficient deposit: need {need}, have {have}")]
    InsufficientDeposit { need: u64, have: u64 },
    #[error("only the controller may submit this payload")]
    Unauthorized,
    #[error("key {0} is owned by another author")]
    KeyOwned(Key256),
}

/// One balance movement inside a fee settlement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Movement {
    /// Spendable balance to spendable balance.
    Pay { from: PublicKey, to: PublicKey, amount: u64 },
    /// Locked deposit of `from` to the spendable balance of `to`.
    Slash { from: PublicKey, to: PublicKey, amount: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    RegisterIdentity { addr: Key256, acl: Vec<u8> },
    Put { key: Key256, value: Vec<u8> },
    Deposit { amount: u64 },
    FeeSettlement { memo: String, movements: Vec<Movement> },
    CommitmentPost { key: Key256, value: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: PublicKey,
    pub payload: Payload,
    pub nonce: u64,
    pub signature: Signature,
}

impl Transaction {
    pub fn new(signer: &dyn Signer, payload: Payload, nonce: u64) -> Transaction {
        let msg = signing_bytes(&payload, nonce);
        Transaction { sender: signer.public_key(), signature: signer.sign(&msg), payload, nonce }
    }

    pub fn verify_signature(&self) -> bool {
        verify(&self.sender, &signing_bytes(&self.payload, self.nonce), &self.signature)
    }
}

fn signing_bytes(payload: &Payload, nonce: u64) -> Vec<u8> {
    serde_json::to_vec(&(payload, nonce)).expect("payload serializes")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub balance: u64,
    pub deposit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogStatus {
    Ok,
    Corruption { height: u64 },
}

#[derive(Debug, Clone)]
struct Block {
    tx: Transaction,
    entries: std::ops::Range<usize>,
    chain: Key256,
}

#[derive(Debug, Clone, Default)]
struct State {
    accounts: BTreeMap<PublicKey, Account>,
    nonces: HashMap<PublicKey, u64>,
    owners: HashMap<Key256, PublicKey>,
}

/// Key under which an account's state is published.
pub fn account_key(pk: &PublicKey) -> Key256 {
    hash(&[b"account", &pk.0])
}

impl State {
    fn genesis(balances: &[(PublicKey, u64)]) -> State {
        let mut s = State::default();
        for (pk, amount) in balances {
            s.accounts.entry(*pk).or_default().balance += amount;
        }
        s
    }

    /// Apply `tx` at `height`. On error the state is untouched.
    fn apply(
        &mut self,
        controller: &PublicKey,
        tx: &Transaction,
        height: u64,
    ) -> Result<Vec<LedgerEntry>, LedgerError> {
        if !tx.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        let last = self.nonces.get(&tx.sender).copied();
        if let Some(last) = last {
            if tx.nonce <= last {
                return Err(LedgerError::StaleNonce { got: tx.nonce, last });
            }
        }
        let author = tx.sender;
        let entry = |key: Key256, value: Vec<u8>| LedgerEntry { key, value, height, author };
        let entries = match &tx.payload {
            Payload::RegisterIdentity { addr, acl } => {
                self.claim(addr, &author)?;
                vec![entry(*addr, acl.clone())]
            }
            Payload::Put { key, value } => {
                self.claim(key, &author)?;
                vec![entry(*key, value.clone())]
            }
            Payload::CommitmentPost { key, value } => vec![entry(*key, value.clone())],
            Payload::Deposit { amount } => {
                let acct = self.accounts.get(&author).copied().unwrap_or_default();
                if acct.balance < *amount {
                    return Err(LedgerError::InsufficientBalance { need: *amount, have: acct.balance });
                }
                let updated = Account { balance: acct.balance - amount, deposit: acct.deposit + amount };
                self.accounts.insert(author, updated);
                vec![entry(account_key(&author), account_bytes(&updated))]
            }
            Payload::FeeSettlement { movements, .. } => {
                if &author != controller {
                    return Err(LedgerError::Unauthorized);
                }
                let mut scratch = self.accounts.clone();
                let mut touched = std::collections::BTreeSet::new();
                for m in movements {
                    match m {
                        Movement::Pay { from, to, amount } => {
                            let a = scratch.entry(*from).or_default();
                            if a.balance < *amount {
                                return Err(LedgerError::InsufficientBalance {
                                    need: *amount,
                                    have: a.balance,
                                });
                            }
                            a.balance -= amount;
                            scratch.entry(*to).or_default().balance += amount;
                            touched.extend([*from, *to]);
                        }
                        Movement::Slash { from, to, amount } => {
                            let a = scratch.entry(*from).or_default();
                            if a.deposit < *amount {
                                return Err(LedgerError::InsufficientDeposit {
                                    need: *amount,
                                    have: a.deposit,
                                });
                            }
                            a.deposit -= amount;
                            scratch.entry(*to).or_default().balance += amount;
                            touched.extend([*from, *to]);
                        }
                    }
                }
                self.accounts = scratch;
                let mut out: Vec<LedgerEntry> = touched
                    .iter()
                    .map(|pk| entry(account_key(pk), account_bytes(&self.accounts[pk])))
                    .collect();
                if out.is_empty() {
                    out.push(entry(hash(&[b"settlement", &height.to_be_bytes()]), Vec::new()));
                }
                out
            }
        };
        self.nonces.insert(author, tx.nonce);
        Ok(entries)
    }

    fn claim(&mut self, key: &Key256, author: &PublicKey) -> Result<(), LedgerError> {
        match self.owners.get(key) {
            Some(owner) if owner != author => Err(LedgerError::KeyOwned(*key)),
            _ => {
                self.owners.insert(*key, *author);
                Ok(())
            }
        }
    }
}

fn account_bytes(a: &Account) -> Vec<u8> {
    serde_json::to_vec(a).expect("account serializes")
}

fn chain_step(prev: &Key256, entries: &[LedgerEntry]) -> Key256 {
    let mut buf = Vec::new();
    buf.extend_from_slice(&prev.0);
    for e in entries {
        e.encode_into(&mut buf);
    }
    hash(&[&buf])
}

/// Single-writer simulated ledger with instant finality.
#[derive(Debug, Clone)]
pub struct Ledger {
    controller: PublicKey,
    genesis: Vec<(PublicKey, u64)>,
    state: State,
    log: EntryLog,
    blocks: Vec<Block>,
    rejected: Vec<(Transaction, LedgerError)>,
}

impl Ledger {
    /// `controller` is the settlement authority; `genesis` seeds balances.
    pub fn new(controller: PublicKey, genesis: &[(PublicKey, u64)]) -> Ledger {
        Ledger {
            controller,
            genesis: genesis.to_vec(),
            state: State::genesis(genesis),
            log: EntryLog::default(),
            blocks: Vec::new(),
            rejected: Vec::new(),
        }
    }

    pub fn controller(&self) -> PublicKey {
        self.controller
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn submit_tx(&mut self, tx: Transaction) -> Result<Receipt, LedgerError> {
        let height = self.height() + 1;
        match self.state.apply(&self.controller, &tx, height) {
            Ok(entries) => {
                let prev = self.blocks.last().map(|b| b.chain).unwrap_or(Key256::ZERO);
                let chain = chain_step(&prev, &entries);
                let start = self.log.len();
                for e in entries {
                    self.log.append(e);
                }
                self.blocks.push(Block { tx, entries: start..self.log.len(), chain });
                Ok(Receipt { height })
            }
            Err(e) => {
                self.rejected.push((tx, e.clone()));
                Err(e)
            }
        }
    }

    /// Sign `payload` with the sender's next nonce and submit it.
    pub fn submit(&mut self, signer: &dyn Signer, payload: Payload) -> Result<Receipt, LedgerError> {
        let nonce = self.next_nonce(&signer.public_key());
        self.submit_tx(Transaction::new(signer, payload, nonce))
    }

    pub fn next_nonce(&self, pk: &PublicKey) -> u64 {
        self.state.nonces.get(pk).map(|n| n + 1).unwrap_or(0)
    }

    pub fn get(&self, key: &Key256) -> Option<&[u8]> {
        self.log.get(key)
    }

    pub fn get_at(&self, key: &Key256, height: u64) -> Option<&[u8]> {
        self.log.get_at(key, height)
    }

    pub fn log(&self) -> &EntryLog {
        &self.log
    }

    pub fn account(&self, pk: &PublicKey) -> Account {
        self.state.accounts.get(pk).copied().unwrap_or_default()
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&PublicKey, &Account)> {
        self.state.accounts.iter()
    }

    /// Sum of all balances and deposits.
    pub fn total_value(&self) -> u128 {
        self.state.accounts.values().map(|a| a.balance as u128 + a.deposit as u128).sum()
    }

    pub fn rejected(&self) -> &[(Transaction, LedgerError)] {
        &self.rejected
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().map(|b| &b.tx)
    }

    /// Replay every transaction from genesis, re-checking signatures, the
    /// produced entries and the hash chain. Reports the first bad height.
    pub fn verify_log(&self) -> LogStatus {
        let mut state = State::genesis(&self.genesis);
        let mut prev = Key256::ZERO;
        for (i, block) in self.blocks.iter().enumerate() {
            let height = i as u64 + 1;
            let stored = &self.log.entries()[block.entries.clone()];
            let replayed = match state.apply(&self.controller, &block.tx, height) {
                Ok(e) => e,
                Err(_) => return LogStatus::Corruption { height },
            };
            if replayed.as_slice() != stored {
                return LogStatus::Corruption { height };
            }
            let chain = chain_step(&prev, stored);
            if chain != block.chain {
                return LogStatus::Corruption { height };
            }
            prev = chain;
        }
        LogStatus::Ok
    }

    /// Fault-injection hook: flip one bit of a stored entry's encoding.
    ///
    /// `byte` indexes the concatenation `key || value || author`.
    pub fn corrupt_entry(&mut self, entry_index: usize, byte: usize) {
        self.log.flip_byte(entry_index, byte);
    }

    /// One line per entry: `height \t hex(key) \t base64(value) \t hex(author)`.
    pub fn dump(&self) -> String {
        self.log.to_dump()
    }
}
