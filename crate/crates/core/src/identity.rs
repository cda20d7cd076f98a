//! Shared identities and predicate-based access control.
//!
//! An identity is the XOR of the hashed public keys of its parties. Its ACL
//! (one predicate per party) lives on the ledger under that address.
//!
//! Predicate text, one s-expression:
//!
//! ```text
//! pred := (any)
//!       | (owner)                 ; requester is a party of the identity
//!       | (keys <hex-pk> ...)     ; requester is one of the listed keys
//!       | (and <pred> <pred> ...)
//!       | (or <pred> <pred> ...)
//!       | (not <pred>)
//! ```
//!
//! Keys are 64 hex digits with an optional `0x` prefix. ACL text is one
//! `<hex-pk> <pred>` pair per line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::crypto::{Key256, Keypair, PublicKey, Signer};
use crate::ledger::{Ledger, LedgerError, Payload};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("an identity needs at least one party")]
    NoParties,
    #[error("ledger rejected the registration: {0}")]
    LedgerRejected(#[from] LedgerError),
    #[error("predicate: {0}")]
    Predicate(String),
    #[error("acl line {line}: {reason}")]
    Acl { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    AllowAny,
    Owner,
    Keys(Vec<PublicKey>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn eval(&self, acl: &Acl, pk: &PublicKey) -> bool {
        match self {
            Predicate::AllowAny => true,
            Predicate::Owner => acl.entries.contains_key(pk),
            Predicate::Keys(ks) => ks.contains(pk),
            Predicate::And(ps) => ps.iter().all(|p| p.eval(acl, pk)),
            Predicate::Or(ps) => ps.iter().any(|p| p.eval(acl, pk)),
            Predicate::Not(p) => !p.eval(acl, pk),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, ps: &[Predicate]| {
            write!(f, "({op}")?;
            for p in ps {
                write!(f, " {p}")?;
            }
            write!(f, ")")
        };
        match self {
            Predicate::AllowAny => write!(f, "(any)"),
            Predicate::Owner => write!(f, "(owner)"),
            Predicate::Keys(ks) => {
                write!(f, "(keys")?;
                for k in ks {
                    write!(f, " 0x{}", k.to_hex())?;
                }
                write!(f, ")")
            }
            Predicate::And(ps) => list(f, "and", ps),
            Predicate::Or(ps) => list(f, "or", ps),
            Predicate::Not(p) => write!(f, "(not {p})"),
        }
    }
}

impl FromStr for Predicate {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let toks: Vec<&str> = spaced.split_whitespace().collect();
        let mut pos = 0;
        let p = parse_pred(&toks, &mut pos)?;
        if pos != toks.len() {
            return Err(IdentityError::Predicate(format!("trailing input at token {pos}")));
        }
        Ok(p)
    }
}

fn parse_pred(toks: &[&str], pos: &mut usize) -> Result<Predicate, IdentityError> {
    let err = |m: String| IdentityError::Predicate(m);
    let next = |pos: &mut usize| {
        let t = toks.get(*pos).copied();
        *pos += 1;
        t.ok_or_else(|| err("unexpected end of input".into()))
    };
    if next(pos)? != "(" {
        return Err(err(format!("expected `(` at token {}", *pos - 1)));
    }
    let op = next(pos)?;
    let mut args = Vec::new();
    let mut keys = Vec::new();
    loop {
        match toks.get(*pos).copied() {
            None => return Err(err("unclosed `(`".into())),
            Some(")") => {
                *pos += 1;
                break;
            }
            Some("(") => args.push(parse_pred(toks, pos)?),
            Some(atom) => {
                if op != "keys" {
                    return Err(err(format!("unexpected atom `{atom}` in `{op}`")));
                }
                keys.push(PublicKey::from_hex(atom).map_err(|e| err(format!("bad key `{atom}`: {e}")))?);
                *pos += 1;
            }
        }
    }
    let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(err(format!("`{op}` {what}"))) };
    Ok(match op {
        "any" => {
            need(args.is_empty(), "takes no arguments")?;
            Predicate::AllowAny
        }
        "owner" => {
            need(args.is_empty(), "takes no arguments")?;
            Predicate::Owner
        }
        "keys" => {
            need(args.is_empty(), "takes only keys")?;
            Predicate::Keys(keys)
        }
        "and" => {
            need(!args.is_empty(), "needs at least one operand")?;
            Predicate::And(args)
        }
        "or" => {
            need(!args.is_empty(), "needs at least one operand")?;
            Predicate::Or(args)
        }
        "not" => {
            need(args.len() == 1, "takes exactly one operand")?;
            Predicate::Not(Box::new(args.pop().unwrap()))
        }
        other => return Err(err(format!("unknown predicate `{other}`"))),
    })
}

/// Per-party policies of one shared identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Acl {
    pub entries: BTreeMap<PublicKey, Predicate>,
}

impl Acl {
    pub fn policy(&self, pk: &PublicKey) -> Option<&Predicate> {
        self.entries.get(pk)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, p)| format!("{} {}\n", k.to_hex(), p)).collect()
    }

    pub fn parse(text: &str) -> Result<Acl, IdentityError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| IdentityError::Acl { line: i + 1, reason };
            let (k, p) = line.split_once(char::is_whitespace).ok_or_else(|| bad("expected `<key> <predicate>`".into()))?;
            let pk = PublicKey::from_hex(k).map_err(|e| bad(e.to_string()))?;
            let pred: Predicate = p.parse().map_err(|e: IdentityError| bad(e.to_string()))?;
            if entries.insert(pk, pred).is_some() {
                return Err(bad("duplicate key".into()));
            }
        }
        Ok(Acl { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedIdentity {
    pub addr: Key256,
    pub pks: Vec<PublicKey>,
}

impl SharedIdentity {
    pub fn n(&self) -> usize {
        self.pks.len()
    }
}

/// XOR-fold of 256-bit digests starting from zero.
pub fn fold_address(digests: &[Key256]) -> Key256 {
    digests.iter().fold(Key256::ZERO, |acc, d| acc.xor(d))
}

pub fn address_of(pks: &[PublicKey]) -> Key256 {
    fold_address(&pks.iter().map(|pk| pk.digest()).collect::<Vec<_>>())
}

/// Generates one keypair per policy, derives the address and registers the
/// ACL on the ledger, signed by the first party. The private keys stay with
/// the caller.
pub fn gen_shared_identity<R: RngCore + ?Sized>(
    policies: &[Predicate],
    ledger: &mut Ledger,
    rng: &mut R,
) -> Result<(SharedIdentity, Vec<Keypair>), IdentityError> {
    let keys: Vec<Keypair> = policies.iter().map(|_| Keypair::generate(rng)).collect();
    let id = register_identity(&keys, policies, ledger)?;
    Ok((id, keys))
}

/// Registers an identity for existing keys.
pub fn register_identity(
    keys: &[Keypair],
    policies: &[Predicate],
    ledger: &mut Ledger,
) -> Result<SharedIdentity, IdentityError> {
    if keys.is_empty() {
        return Err(IdentityError::NoParties);
    }
    let pks: Vec<PublicKey> = keys.iter().map(|k| k.public_key()).collect();
    let addr = address_of(&pks);
    let acl = Acl { entries: pks.iter().copied().zip(policies.iter().cloned()).collect() };
    ledger.submit(&keys[0], Payload::RegisterIdentity { addr, acl: acl.to_text().into_bytes() })?;
    Ok(SharedIdentity { addr, pks })
}

/// The ACL registered under `addr`, if any.
pub fn lookup_acl(addr: &Key256, ledger: &Ledger) -> Option<Acl> {
    let raw = ledger.get(addr)?;
    if raw.is_empty() {
        return None;
    }
    Acl::parse(std::str::from_utf8(raw).ok()?).ok()
}

/// 1 iff `addr` has a registered ACL and `q` holds for `pk` against it.
pub fn check_permission(pk: &PublicKey, addr: &Key256, q: &Predicate, ledger: &Ledger) -> bool {
    lookup_acl(addr, ledger).is_some_and(|acl| q.eval(&acl, pk))
}
