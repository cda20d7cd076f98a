//! Scenario files and the end-to-end run behind `mpcnet run`.
//!
//! A scenario is `key=value` lines (`#` starts a comment):
//!
//! ```text
//! nodes=12            mode=shamir|spdz      committee=5
//! threshold=2         reduce=3              field=<prime>
//! seed=7              deposit=100           node_balance=1000
//! balance=10000       circuit=a.circ,b.circ
//! input.0=52000       fault.3=wrong-share   metrics=9,27,81
//! tree=3              fee.round=1  fee.add=1  fee.mul=10  fee.min_balance=10
//! ```
//!
//! `fault.<seat>` targets a committee seat (0-based), so the faulty node is
//! guaranteed to take part. Circuit paths are relative to the scenario file.
//! Each circuit reads the first inputs, as many as it declares.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use super::committee::{measure_mul, metrics_table, MetricsRow};
use super::network::{Network, NetworkConfig};
use super::trace::{ComputationTrace, Status};
use super::{Behavior, Detection, Mode, MpcError};
use crate::circuits::{eval_plain, parse_circuit, Circuit};
use crate::crypto::{Key256, Keypair, PublicKey, Signer};
use crate::dht::{protocol_load, protocol_store};
use crate::field::{Fe, Field};
use crate::identity::{register_identity, Predicate};
use crate::incentives::{settle_computation, FeeSchedule, SettleError, SettlementReport};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}:{line}: {msg}")]
    Syntax { path: PathBuf, line: usize, msg: String },
    #[error("scenario is missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("circuit {path}: {reason}")]
    Circuit { path: PathBuf, reason: String },
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Settle(#[from] SettleError),
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub network: NetworkConfig,
    pub circuits: Vec<(String, Circuit)>,
    pub inputs: Vec<u64>,
    /// Committee seat to behavior.
    pub faults: BTreeMap<usize, Behavior>,
    /// Required before running; the CLI flag overrides the file.
    pub seed: Option<u64>,
    pub fees: FeeSchedule,
    pub requester_balance: u64,
    pub metrics: Vec<usize>,
    pub tree: usize,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.to_path_buf(), reason: e.to_string() })?;
        Self::parse(&text, path)
    }

    /// `origin` names the file for diagnostics; circuit paths are resolved
    /// against its directory.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ScenarioError> {
        let base = origin.parent().unwrap_or(Path::new("."));
        let mut net = NetworkConfig::default();
        let mut fees = FeeSchedule::default();
        let mut circuit_paths: Vec<String> = Vec::new();
        let mut inputs: BTreeMap<usize, u64> = BTreeMap::new();
        let mut faults = BTreeMap::new();
        let (mut seed, mut balance, mut tree) = (None, 10_000u64, 3usize);
        let mut metrics = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let syntax = |msg: String| ScenarioError::Syntax { path: origin.to_path_buf(), line: i + 1, msg };
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| syntax(format!("expected key=value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<u64>().map_err(|e| syntax(format!("{k}: {e}")));
            let list = |v: &str| -> Result<Vec<usize>, ScenarioError> {
                v.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| syntax(format!("{k}: {e}")))).collect()
            };
            match k {
                "nodes" => net.nodes = num(v)? as usize,
                "mode" => net.mode = v.parse().map_err(syntax)?,
                "committee" => net.committee = num(v)? as usize,
                "threshold" => net.threshold = num(v)? as usize,
                "reduce" => net.reduce = Some(num(v)? as usize),
                "field" => net.field = Field::new(num(v)?).map_err(|e| syntax(e.to_string()))?,
                "node_balance" => net.node_balance = num(v)?,
                "deposit" => net.deposit = num(v)?,
                "seed" => seed = Some(num(v)?),
                "balance" => balance = num(v)?,
                "tree" => tree = num(v)? as usize,
                "metrics" => metrics = list(v)?,
                "circuit" => circuit_paths = v.split(',').map(|p| p.trim().to_string()).collect(),
                "fee.round" => fees.w_round = num(v)?,
                "fee.add" => fees.w_add = num(v)?,
                "fee.mul" => fees.w_mul = num(v)?,
                "fee.min_balance" => fees.min_balance = num(v)?,
                _ => {
                    if let Some(idx) = k.strip_prefix("input.") {
                        let idx = idx.parse::<usize>().map_err(|e| syntax(format!("{k}: {e}")))?;
                        inputs.insert(idx, num(v)?);
                    } else if let Some(seat) = k.strip_prefix("fault.") {
                        let seat = seat.parse::<usize>().map_err(|e| syntax(format!("{k}: {e}")))?;
                        faults.insert(seat, v.parse::<Behavior>().map_err(syntax)?);
                    } else {
                        return Err(syntax(format!("unknown key '{k}'")));
                    }
                }
            }
        }
        if circuit_paths.is_empty() {
            return Err(ScenarioError::MissingKey("circuit"));
        }
        if inputs.is_empty() {
            return Err(ScenarioError::MissingKey("input.0"));
        }
        if inputs.keys().copied().ne(0..inputs.len()) {
            return Err(ScenarioError::Invalid("inputs must be numbered 0, 1, 2, ... without gaps".into()));
        }
        for (&seat, &b) in &faults {
            if seat >= net.committee {
                return Err(ScenarioError::Invalid(format!("fault.{seat}: committee has {} seats", net.committee)));
            }
            if b == Behavior::BrokenCommitment && net.mode == Mode::Shamir {
                return Err(ScenarioError::Invalid(format!(
                    "fault.{seat}: broken-commitment needs the audit trail, which only spdz mode keeps"
                )));
            }
        }
        let mut circuits = Vec::new();
        for p in circuit_paths {
            let path = base.join(&p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ScenarioError::Io { path: path.clone(), reason: e.to_string() })?;
            let c = parse_circuit(&text).map_err(|e| ScenarioError::Circuit { path: path.clone(), reason: e.to_string() })?;
            if c.inputs().len() > inputs.len() {
                return Err(ScenarioError::Circuit {
                    path,
                    reason: format!("reads {} inputs, scenario provides {}", c.inputs().len(), inputs.len()),
                });
            }
            circuits.push((p, c));
        }
        let modulus = net.field.modulus();
        if let Some(x) = inputs.values().find(|&&x| x >= modulus) {
            return Err(ScenarioError::Invalid(format!("input {x} does not fit the field")));
        }
        Ok(ScenarioConfig {
            network: net,
            circuits,
            inputs: inputs.into_values().collect(),
            faults,
            seed,
            fees,
            requester_balance: balance,
            metrics,
            tree,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CircuitResult {
    pub name: String,
    pub expected: Vec<Fe>,
    /// Final delivered outputs, after any restart.
    pub outputs: Option<Vec<Fe>>,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub traces: Vec<ComputationTrace>,
    pub results: Vec<CircuitResult>,
    pub settlements: Vec<SettlementReport>,
    /// Scripted protocol checks and whether each held.
    pub checks: Vec<(String, bool)>,
    pub events: Vec<String>,
    pub ledger_dump: String,
    pub metrics: Vec<MetricsRow>,
    /// `(computation, detection)` for every fault seen.
    pub detections: Vec<(Key256, Detection)>,
}

impl RunReport {
    pub fn cheating_detected(&self) -> bool {
        !self.detections.is_empty() || self.results.iter().any(|r| r.status != Status::Ok)
    }

    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    /// 0 for a clean run, 2 when any fault was detected.
    pub fn exit_code(&self) -> i32 {
        if self.cheating_detected() {
            2
        } else {
            0
        }
    }

    pub fn trace_text(&self) -> String {
        self.traces.iter().map(ComputationTrace::to_text).collect()
    }

    pub fn settlement_text(&self) -> String {
        self.settlements.iter().map(SettlementReport::to_text).collect()
    }

    pub fn outputs_text(&self) -> String {
        let join = |v: &[Fe]| v.iter().map(|x| x.value().to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        for r in &self.results {
            let got = r.outputs.as_deref().map(join).unwrap_or_else(|| "withheld".into());
            let _ = writeln!(s, "circuit={} status={} outputs={} expected={}", r.name, r.status, got, join(&r.expected));
        }
        s
    }

    pub fn log_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let _ = writeln!(s, "{e}");
        }
        for (c, ok) in &self.checks {
            let _ = writeln!(s, "check {c} {}", if *ok { "ok" } else { "FAILED" });
        }
        s
    }

    pub fn metrics_text(&self) -> Option<String> {
        (!self.metrics.is_empty()).then(|| metrics_table(&self.metrics))
    }
}

/// Runs every protocol once: a two-party shared identity, predicate-gated
/// storage with an allowed and a denied reader, input sharing, each circuit
/// (restarting with a replacement node after an SPDZ abort), fee settlement
/// and declassification.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    let seed = cfg.seed.ok_or(ScenarioError::MissingKey("seed"))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x005e_edc1_1e47);
    let owners: Vec<Keypair> = (0..2).map(|_| Keypair::generate(&mut rng)).collect();
    let reader = Keypair::generate(&mut rng);
    let outsider = Keypair::generate(&mut rng);
    let genesis: Vec<(PublicKey, u64)> = owners.iter().map(|k| (k.public_key(), cfg.requester_balance)).collect();
    let mut net = Network::new(cfg.network, &genesis, seed)?;
    let field = cfg.network.field;
    let mut events = Vec::new();
    let mut checks = Vec::new();

    let id = register_identity(&owners, &[Predicate::Owner, Predicate::Owner], net.ledger_mut())
        .map_err(MpcError::from)?;
    events.push(format!("identity addr={} parties={}", id.addr.to_hex(), id.n()));

    let note = b"scenario note: readable by the listed key only";
    let q = Predicate::Keys(vec![reader.public_key()]);
    let (ledger, dht) = net.stores();
    let a = protocol_store(&owners[0], &id.addr, note, Some(&q), ledger, dht);
    checks.push(("store-with-key-list".to_string(), a.is_some()));
    if let Some(a) = a {
        events.push(format!("store key={} predicate={q}", a.to_hex()));
        let allowed = protocol_load(&reader, &id.addr, &a, ledger, dht);
        checks.push(("load-listed-key-allowed".to_string(), allowed.as_deref() == Some(&note[..])));
        let denied = protocol_load(&outsider, &id.addr, &a, ledger, dht);
        checks.push(("load-outsider-denied".to_string(), denied.is_none()));
    }

    let share_inputs = |net: &mut Network| -> Result<Vec<Key256>, MpcError> {
        cfg.inputs.iter().map(|&x| net.protocol_share(&owners[0], &id.addr, field.elem(x), &Predicate::Owner)).collect()
    };
    let mut pointers = share_inputs(&mut net)?;
    let seats: Vec<String> = net.committee().iter().map(usize::to_string).collect();
    events.push(format!("shared inputs={} committee={}", pointers.len(), seats.join(",")));
    for (&seat, &b) in &cfg.faults {
        let node = net.committee()[seat];
        net.set_behavior(node, b);
        events.push(format!("fault seat={seat} node={node} behavior={b}"));
    }

    let mut traces = Vec::new();
    let mut settlements = Vec::new();
    let mut results = Vec::new();
    let mut detections = Vec::new();
    for (name, circuit) in &cfg.circuits {
        let k = circuit.inputs().len();
        let inputs: Vec<Fe> = cfg.inputs[..k].iter().map(|&x| field.elem(x)).collect();
        let expected = eval_plain(circuit, field, &inputs).map_err(MpcError::from)?;
        let mut attempt = 0;
        let result = loop {
            attempt += 1;
            let out = net.protocol_compute(&owners[0], &id.addr, &pointers[..k], circuit)?;
            events.push(format!(
                "compute circuit={name} attempt={attempt} id={} status={}",
                out.computation.to_hex(),
                out.status()
            ));
            detections.extend(out.faults.iter().map(|f| (out.computation, f.1)));
            let (ctl, ledger) = (net.controller().clone(), net.ledger_mut());
            settlements.push(settle_computation(&out.trace, &cfg.fees, &ctl, ledger)?);
            traces.push(out.trace.clone());
            let quitters: Vec<usize> =
                out.faults.iter().filter(|f| f.1 == Detection::Timeout).map(|f| f.0).collect();
            if cfg.network.mode == Mode::Spdz && out.outputs.is_none() && !quitters.is_empty() && attempt < 3 {
                for q in quitters {
                    let fresh = net.replace_member(q)?;
                    events.push(format!("restart replacing node={q} with node={fresh}"));
                }
                pointers = share_inputs(&mut net)?;
                continue;
            }
            let status = if out.outputs.is_some() && attempt > 1 { Status::Recovered } else { out.status() };
            break CircuitResult { name: name.clone(), expected: expected.clone(), outputs: out.outputs, status };
        };
        checks.push((format!("output-matches-plaintext circuit={name}"), result.outputs.as_ref() == Some(&expected) || result.outputs.is_none()));
        results.push(result);
    }

    // Declassification: the dealer gets its input back, nobody else does.
    let back = net.declassify(&owners[0], &id.addr, &pointers[0]);
    checks.push(("declassify-owner".to_string(), back == Ok(field.elem(cfg.inputs[0]))));
    let other = net.declassify(&owners[1], &id.addr, &pointers[0]);
    checks.push(("declassify-non-owner-denied".to_string(), other == Err(MpcError::Denied)));
    let sent = net.messages_sent();
    let (_, first) = &cfg.circuits[0];
    let k = first.inputs().len();
    let denied = net.protocol_compute(&outsider, &id.addr, &pointers[..k], first);
    checks.push((
        "compute-unauthorized-denied".to_string(),
        matches!(denied, Err(MpcError::Denied)) && net.messages_sent() == sent,
    ));

    let mut metrics = Vec::new();
    for &n in &cfg.metrics {
        metrics.push(measure_mul(n, cfg.tree, field, &mut rng)?);
    }
    Ok(RunReport {
        traces,
        results,
        settlements,
        checks,
        events,
        ledger_dump: net.ledger().dump(),
        metrics,
        detections,
    })
}
