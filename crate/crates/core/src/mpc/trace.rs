//! Line-oriented record of one computation, the input to fee settlement.
//!
//! ```text
//! computation id=<hex> requester=<hex> mode=<shamir|spdz>
//! node pk=<hex> rounds=<r> adds=<a> muls=<m>
//! fault pk=<hex> behavior=<word> channel=<word>
//! event <free text>
//! outcome status=<word> outputs=<v,v,...>
//! ```
//!
//! A trace without an `outcome` line is not finalized.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{Behavior, Detection, Mode};
use crate::crypto::{Key256, PublicKey};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("trace has no computation header")]
    MissingHeader,
}

/// Work one node did for the computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeTally {
    pub pk: PublicKey,
    pub rounds: u64,
    pub adds: u64,
    pub muls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultRecord {
    pub pk: PublicKey,
    pub behavior: Behavior,
    pub channel: Detection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A fault was detected and worked around.
    Recovered,
    /// A fault was detected and the output withheld.
    CheatDetected,
    Aborted,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Recovered => "recovered",
            Status::CheatDetected => "cheat-detected",
            Status::Aborted => "aborted",
        })
    }
}

impl std::str::FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ok" => Status::Ok,
            "recovered" => Status::Recovered,
            "cheat-detected" => Status::CheatDetected,
            "aborted" => Status::Aborted,
            other => return Err(format!("unknown status '{other}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: Status,
    pub outputs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationTrace {
    pub computation: Key256,
    pub requester: PublicKey,
    pub mode: Mode,
    pub nodes: Vec<NodeTally>,
    pub faults: Vec<FaultRecord>,
    pub events: Vec<String>,
    pub outcome: Option<Outcome>,
}

impl ComputationTrace {
    pub fn new(computation: Key256, requester: PublicKey, mode: Mode) -> Self {
        Self { computation, requester, mode, nodes: Vec::new(), faults: Vec::new(), events: Vec::new(), outcome: None }
    }

    pub fn is_finalized(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn is_faulty(&self, pk: &PublicKey) -> bool {
        self.faults.iter().any(|f| &f.pk == pk)
    }

    pub fn event(&mut self, text: impl Into<String>) {
        let text = text.into();
        debug_assert!(!text.contains('\n'));
        self.events.push(text);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "computation id={} requester={} mode={}", self.computation.to_hex(), self.requester.to_hex(), self.mode);
        for n in &self.nodes {
            let _ = writeln!(s, "node pk={} rounds={} adds={} muls={}", n.pk.to_hex(), n.rounds, n.adds, n.muls);
        }
        for f in &self.faults {
            let _ = writeln!(s, "fault pk={} behavior={} channel={}", f.pk.to_hex(), f.behavior, f.channel);
        }
        for e in &self.events {
            let _ = writeln!(s, "event {e}");
        }
        if let Some(o) = &self.outcome {
            let outs: Vec<String> = o.outputs.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "outcome status={} outputs={}", o.status, outs.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut all = Self::parse_all(text)?;
        match all.len() {
            0 => Err(TraceError::MissingHeader),
            1 => Ok(all.remove(0)),
            _ => Err(TraceError::Syntax { line: 0, reason: "more than one computation".into() }),
        }
    }

    /// Parses several traces written back to back.
    pub fn parse_all(text: &str) -> Result<Vec<Self>, TraceError> {
        let mut out: Vec<Self> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: String| TraceError::Syntax { line, reason };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (kind, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            if kind == "event" {
                out.last_mut().ok_or(TraceError::MissingHeader)?.events.push(rest.to_string());
                continue;
            }
            let fields = key_values(rest).map_err(err)?;
            let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("missing {k}=")));
            let num = |k: &str| get(k)?.parse::<u64>().map_err(|e| err(format!("{k}: {e}")));
            let pk = |k: &str| PublicKey::from_hex(get(k)?).map_err(|e| err(format!("{k}: {e}")));
            if kind == "computation" {
                let computation = Key256::from_hex(get("id")?).map_err(|e| err(format!("id: {e}")))?;
                let mode = get("mode")?.parse().map_err(err)?;
                out.push(Self::new(computation, pk("requester")?, mode));
                continue;
            }
            let cur = out.last_mut().ok_or(TraceError::MissingHeader)?;
            match kind {
                "node" => cur.nodes.push(NodeTally { pk: pk("pk")?, rounds: num("rounds")?, adds: num("adds")?, muls: num("muls")? }),
                "fault" => cur.faults.push(FaultRecord {
                    pk: pk("pk")?,
                    behavior: get("behavior")?.parse().map_err(err)?,
                    channel: get("channel")?.parse().map_err(err)?,
                }),
                "outcome" => {
                    let outputs = match get("outputs")? {
                        "" => Vec::new(),
                        list => list
                            .split(',')
                            .map(|v| v.parse::<u64>().map_err(|e| err(format!("outputs: {e}"))))
                            .collect::<Result<_, _>>()?,
                    };
                    cur.outcome = Some(Outcome { status: get("status")?.parse().map_err(err)?, outputs });
                }
                other => return Err(err(format!("unknown record '{other}'"))),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ComputationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn key_values(s: &str) -> Result<BTreeMap<&str, &str>, String> {
    s.split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| format!("expected key=value, got '{kv}'")))
        .collect()
}
