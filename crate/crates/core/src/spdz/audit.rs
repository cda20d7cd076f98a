//! Public audit trail on the ledger.
//!
//! A computation leaves a sequence of steps under keys
//! `H(computation ∥ step)`. Step 0 is `Begin`; then `Commit` (one record per
//! party), `Linear` (one record describing a local linear map), `Open` (one
//! record per party revealing its value and randomness share) and finally
//! `Result`. Multiplications show up as their Beaver decomposition. The
//! auditor replays the trail from the log alone: it derives every party's
//! commitment to every wire homomorphically and checks each posted opening
//! against it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pedersen::{CommitParams, Commitment};
use super::SpdzError;
use crate::crypto::{hash, Key256, PublicKey, Signer};
use crate::field::{Fe, Field};
use crate::ledger::{EntryLog, Ledger, Payload};

pub type WireId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TrailRecord {
    Begin { parties: Vec<PublicKey>, modulus: u64 },
    Commit { wire: WireId, party: usize, commitment: Commitment },
    Linear { out: WireId, terms: Vec<(u64, WireId)>, constant: u64 },
    Open { wire: WireId, party: usize, value: u64, randomness: u64 },
    Result { outputs: Vec<(WireId, u64)> },
}

pub fn trail_key(computation: &Key256, step: u64) -> Key256 {
    hash(&[b"trail", &computation.0, &step.to_be_bytes()])
}

/// Seat keys of a computation in trail order (seat `i` is entry `i - 1`).
pub fn trail_parties(log: &EntryLog, computation: &Key256) -> Option<Vec<PublicKey>> {
    let first = log.history(&trail_key(computation, 0)).into_iter().next()?;
    match serde_json::from_slice(&first.value).ok()? {
        TrailRecord::Begin { parties, .. } => Some(parties),
        _ => None,
    }
}

/// Posts the trail of one computation as it runs.
pub struct TrailWriter<'a> {
    ledger: &'a mut Ledger,
    coordinator: &'a dyn Signer,
    parties: Vec<&'a dyn Signer>,
    computation: Key256,
    field: Field,
    params: CommitParams,
    step: u64,
    next_wire: WireId,
    broken: BTreeSet<usize>,
}

impl<'a> TrailWriter<'a> {
    pub fn begin(
        ledger: &'a mut Ledger,
        computation: Key256,
        coordinator: &'a dyn Signer,
        parties: Vec<&'a dyn Signer>,
        field: Field,
    ) -> Result<Self, SpdzError> {
        let params = CommitParams::for_field(field)?;
        let mut w = TrailWriter {
            ledger,
            coordinator,
            parties,
            computation,
            field,
            params,
            step: 0,
            next_wire: 0,
            broken: BTreeSet::new(),
        };
        let rec = TrailRecord::Begin {
            parties: w.parties.iter().map(|s| s.public_key()).collect(),
            modulus: field.modulus(),
        };
        w.post(None, &rec)?;
        w.step += 1;
        Ok(w)
    }

    pub fn computation(&self) -> Key256 {
        self.computation
    }

    pub fn params(&self) -> CommitParams {
        self.params
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn parties(&self) -> usize {
        self.parties.len()
    }

    /// Steps posted so far, `Begin` included.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn ledger(&self) -> &Ledger {
        self.ledger
    }

    /// Party (1-based) posts commitments that do not match its shares.
    pub fn set_broken_commitment(&mut self, party: usize) {
        self.broken.insert(party);
    }

    pub fn fresh_wire(&mut self) -> WireId {
        let w = self.next_wire;
        self.next_wire += 1;
        w
    }

    pub fn post_commit(&mut self, wire: WireId, commitments: &[Commitment]) -> Result<(), SpdzError> {
        for (i, c) in commitments.iter().enumerate() {
            let party = i + 1;
            let mut c = *c;
            if self.broken.contains(&party) {
                c = self.params.combine(c, self.params.public(self.field.one()));
            }
            self.post(Some(i), &TrailRecord::Commit { wire, party, commitment: c })?;
        }
        self.step += 1;
        Ok(())
    }

    pub fn post_linear(&mut self, out: WireId, terms: &[(Fe, WireId)], constant: Fe) -> Result<(), SpdzError> {
        let rec = TrailRecord::Linear {
            out,
            terms: terms.iter().map(|(k, w)| (k.value(), *w)).collect(),
            constant: constant.value(),
        };
        self.post(None, &rec)?;
        self.step += 1;
        Ok(())
    }

    /// `openings[i]` is party `i+1`'s `(value share, randomness share)`.
    pub fn post_open(&mut self, wire: WireId, openings: &[(Fe, Fe)]) -> Result<(), SpdzError> {
        for (i, (v, r)) in openings.iter().enumerate() {
            let rec = TrailRecord::Open { wire, party: i + 1, value: v.value(), randomness: r.value() };
            self.post(Some(i), &rec)?;
        }
        self.step += 1;
        Ok(())
    }

    pub fn post_result(&mut self, outputs: &[(WireId, Fe)]) -> Result<(), SpdzError> {
        let rec = TrailRecord::Result { outputs: outputs.iter().map(|(w, v)| (*w, v.value())).collect() };
        self.post(None, &rec)?;
        self.step += 1;
        Ok(())
    }

    fn post(&mut self, party: Option<usize>, rec: &TrailRecord) -> Result<(), SpdzError> {
        let signer = match party {
            Some(i) => self.parties[i],
            None => self.coordinator,
        };
        let value = serde_json::to_vec(rec).expect("trail record serializes");
        let key = trail_key(&self.computation, self.step);
        self.ledger.submit(signer, Payload::CommitmentPost { key, value })?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditVerdict {
    Pass { outputs: Vec<(WireId, Fe)> },
    Fail { guilty: BTreeSet<usize>, output_mismatch: bool },
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, AuditVerdict::Pass { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("trail is incomplete: step {step} missing")]
    IncompleteTrail { step: u64 },
    #[error("step {step}: {reason}")]
    Malformed { step: u64, reason: String },
}

/// Replays the trail of `computation` from `log`.
///
/// `claimed`, if given, is checked against both the posted result and the
/// values the openings actually reconstruct.
pub fn audit_trail(log: &EntryLog, computation: &Key256, claimed: Option<&[Fe]>) -> Result<AuditVerdict, AuditError> {
    let malformed = |step: u64, reason: &str| AuditError::Malformed { step, reason: reason.to_string() };
    let read = |step: u64| -> Result<Vec<(PublicKey, TrailRecord)>, AuditError> {
        log.history(&trail_key(computation, step))
            .into_iter()
            .map(|e| {
                serde_json::from_slice(&e.value)
                    .map(|r| (e.author, r))
                    .map_err(|err| malformed(step, &format!("undecodable record: {err}")))
            })
            .collect()
    };

    let begin = read(0)?;
    let (coordinator, parties, modulus) = match begin.as_slice() {
        [] => return Err(AuditError::IncompleteTrail { step: 0 }),
        [(author, TrailRecord::Begin { parties, modulus })] => (*author, parties.clone(), *modulus),
        _ => return Err(malformed(0, "expected a single begin record")),
    };
    let n = parties.len();
    let field = Field::new(modulus).map_err(|e| malformed(0, &e.to_string()))?;
    let params = CommitParams::for_field(field).map_err(|e| malformed(0, &e.to_string()))?;

    let mut wires: BTreeMap<WireId, Vec<Commitment>> = BTreeMap::new();
    let mut opened: BTreeMap<WireId, Fe> = BTreeMap::new();
    let mut guilty = BTreeSet::new();

    for step in 1.. {
        let recs = read(step)?;
        if recs.is_empty() {
            return Err(AuditError::IncompleteTrail { step });
        }
        match &recs[0].1 {
            TrailRecord::Commit { wire, .. } => {
                let wire = *wire;
                let mut per_party = vec![None; n];
                for (author, rec) in &recs {
                    let TrailRecord::Commit { wire: w, party, commitment } = rec else {
                        return Err(malformed(step, "mixed record kinds"));
                    };
                    if *w != wire || *party == 0 || *party > n || *author != parties[party - 1] {
                        return Err(malformed(step, "commit record out of place"));
                    }
                    if per_party[party - 1].replace(*commitment).is_some() {
                        return Err(malformed(step, "duplicate commitment"));
                    }
                }
                let all: Option<Vec<Commitment>> = per_party.into_iter().collect();
                let all = all.ok_or(AuditError::IncompleteTrail { step })?;
                if wires.insert(wire, all).is_some() {
                    return Err(malformed(step, "wire committed twice"));
                }
            }
            TrailRecord::Linear { .. } => {
                let [(author, TrailRecord::Linear { out, terms, constant })] = recs.as_slice() else {
                    return Err(malformed(step, "expected a single linear record"));
                };
                if *author != coordinator {
                    return Err(malformed(step, "linear record not from coordinator"));
                }
                let mut derived = Vec::with_capacity(n);
                for i in 0..n {
                    let mut cs = Vec::with_capacity(terms.len());
                    for (k, w) in terms {
                        let c = wires.get(w).ok_or_else(|| malformed(step, &format!("unknown wire {w}")))?;
                        cs.push((field.elem(*k), c[i]));
                    }
                    let k = (i == 0).then(|| field.elem(*constant));
                    derived.push(params.linear(&cs, k));
                }
                if wires.insert(*out, derived).is_some() {
                    return Err(malformed(step, "wire defined twice"));
                }
            }
            TrailRecord::Open { wire, .. } => {
                let wire = *wire;
                let cs = wires.get(&wire).ok_or_else(|| malformed(step, &format!("unknown wire {wire}")))?.clone();
                let mut seen = vec![false; n];
                let mut total = field.zero();
                for (author, rec) in &recs {
                    let TrailRecord::Open { wire: w, party, value, randomness } = rec else {
                        return Err(malformed(step, "mixed record kinds"));
                    };
                    if *w != wire || *party == 0 || *party > n || *author != parties[party - 1] {
                        return Err(malformed(step, "open record out of place"));
                    }
                    if std::mem::replace(&mut seen[party - 1], true) {
                        return Err(malformed(step, "duplicate opening"));
                    }
                    let (v, r) = (field.elem(*value), field.elem(*randomness));
                    if !params.verify_open(cs[party - 1], v, r) {
                        guilty.insert(*party);
                    }
                    total += v;
                }
                if seen.iter().any(|s| !s) {
                    return Err(AuditError::IncompleteTrail { step });
                }
                opened.insert(wire, total);
            }
            TrailRecord::Result { .. } => {
                let [(author, TrailRecord::Result { outputs })] = recs.as_slice() else {
                    return Err(malformed(step, "expected a single result record"));
                };
                if *author != coordinator {
                    return Err(malformed(step, "result not from coordinator"));
                }
                let outputs: Vec<(WireId, Fe)> = outputs.iter().map(|(w, v)| (*w, field.elem(*v))).collect();
                let mut output_mismatch = outputs.iter().any(|(w, v)| opened.get(w) != Some(v));
                if let Some(claimed) = claimed {
                    output_mismatch |= claimed.len() != outputs.len()
                        || claimed.iter().zip(&outputs).any(|(c, (_, v))| c.value() != v.value());
                }
                return Ok(if guilty.is_empty() && !output_mismatch {
                    AuditVerdict::Pass { outputs }
                } else {
                    AuditVerdict::Fail { guilty, output_mismatch }
                });
            }
            TrailRecord::Begin { .. } => return Err(malformed(step, "begin after start")),
        }
    }
    unreachable!()
}
