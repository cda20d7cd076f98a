//! Arithmetic circuits: IR, plaintext evaluation, select lowering,
//! feed-forward layering and a cost model.

mod layer;
mod parse;

pub use layer::{layerize, layerize_with_floor, Layer, LayerKind, LayeredCircuit, MIN_QUORUM};
pub use parse::{parse_circuit, ParseError};

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::field::{Fe, Field};

pub type GateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Input,
    Add(GateId, GateId),
    /// Signed so that negation survives any field choice.
    ScalarMul(i128, GateId),
    Mul(GateId, GateId),
    /// `select(c, a, b) = c*a + (1-c)*b`.
    Select(GateId, GateId, GateId),
    Output(GateId),
}

impl GateKind {
    pub fn operands(&self) -> Vec<GateId> {
        match *self {
            GateKind::Input => vec![],
            GateKind::Add(a, b) | GateKind::Mul(a, b) => vec![a, b],
            GateKind::ScalarMul(_, a) | GateKind::Output(a) => vec![a],
            GateKind::Select(c, a, b) => vec![c, a, b],
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, GateKind::Add(..) | GateKind::ScalarMul(..))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub name: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("expected {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("gate {gate} references gate {operand} which is not earlier")]
    NotTopological { gate: GateId, operand: GateId },
    #[error("reduction factor must be >= 2 and N >= c (got N={n}, c={c})")]
    InvalidFactor { n: usize, c: usize },
}

/// Gates in topological order; inputs and outputs are gates too.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(gates: Vec<Gate>) -> Result<Circuit, CircuitError> {
        for (i, g) in gates.iter().enumerate() {
            if let Some(&operand) = g.kind.operands().iter().find(|&&o| o >= i) {
                return Err(CircuitError::NotTopological { gate: i, operand });
            }
        }
        Ok(Circuit { gates })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn inputs(&self) -> Vec<GateId> {
        self.gates.iter().enumerate().filter(|(_, g)| g.kind == GateKind::Input).map(|(i, _)| i).collect()
    }

    pub fn outputs(&self) -> Vec<GateId> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g.kind, GateKind::Output(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn arity(&self) -> (usize, usize) {
        (self.inputs().len(), self.outputs().len())
    }

    pub fn count(&self, pred: impl Fn(&GateKind) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(&g.kind)).count()
    }

    /// Multiplicative depth of every gate, selects counting as one mul.
    pub fn mul_depths(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            let base = g.kind.operands().iter().map(|&o| d[o]).max().unwrap_or(0);
            d[i] = match g.kind {
                GateKind::Mul(..) | GateKind::Select(..) => base + 1,
                _ => base,
            };
        }
        d
    }

    pub fn mul_depth(&self) -> usize {
        self.mul_depths().into_iter().max().unwrap_or(0)
    }

    /// Renders back into the circuit grammar.
    pub fn to_text(&self) -> String {
        let name = |i: GateId| self.gates[i].name.as_str();
        let mut out = String::new();
        for g in &self.gates {
            let line = match g.kind {
                GateKind::Input => format!("in {}", g.name),
                GateKind::Add(a, b) => format!("{} = add {} {}", g.name, name(a), name(b)),
                GateKind::ScalarMul(k, a) => format!("{} = smul {} {}", g.name, k, name(a)),
                GateKind::Mul(a, b) => format!("{} = mul {} {}", g.name, name(a), name(b)),
                GateKind::Select(c, a, b) => format!("{} = select {} {} {}", g.name, name(c), name(a), name(b)),
                GateKind::Output(a) => format!("out {}", name(a)),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Uniformly random circuit over the gate set, for testing.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, inputs: usize, inner: usize, outputs: usize, selects: bool) -> Circuit {
        let mut gates: Vec<Gate> =
            (0..inputs).map(|i| Gate { kind: GateKind::Input, name: format!("x{i}") }).collect();
        for j in 0..inner {
            let n = gates.len();
            let mut pick = || rng.gen_range(0..n);
            let (a, b, c) = (pick(), pick(), pick());
            let kind = match rng.gen_range(0..if selects { 4 } else { 3 }) {
                0 => GateKind::Add(a, b),
                1 => GateKind::ScalarMul(rng.gen_range(-5..=5), a),
                2 => GateKind::Mul(a, b),
                _ => GateKind::Select(c, a, b),
            };
            gates.push(Gate { kind, name: format!("g{j}") });
        }
        let n = gates.len();
        for k in 0..outputs {
            let src = if k == 0 { n - 1 } else { rng.gen_range(0..n) };
            gates.push(Gate { kind: GateKind::Output(src), name: format!("o{k}") });
        }
        Circuit { gates }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Evaluates gate by gate; the reference every MPC run is checked against.
pub fn eval_plain(circuit: &Circuit, field: Field, inputs: &[Fe]) -> Result<Vec<Fe>, CircuitError> {
    let expected = circuit.inputs().len();
    if inputs.len() != expected {
        return Err(CircuitError::ArityMismatch { expected, got: inputs.len() });
    }
    let mut vals = vec![field.zero(); circuit.gates.len()];
    let mut next_in = inputs.iter();
    let mut outs = Vec::new();
    for (i, g) in circuit.gates.iter().enumerate() {
        vals[i] = match g.kind {
            GateKind::Input => *next_in.next().unwrap(),
            GateKind::Add(a, b) => vals[a] + vals[b],
            GateKind::ScalarMul(k, a) => field.from_i128(k) * vals[a],
            GateKind::Mul(a, b) => vals[a] * vals[b],
            GateKind::Select(c, a, b) => vals[c] * vals[a] + (field.one() - vals[c]) * vals[b],
            GateKind::Output(a) => {
                outs.push(vals[a]);
                vals[a]
            }
        };
    }
    Ok(outs)
}

/// Replaces every `select(c, a, b)` by `c*(a-b) + b`, so both branches are
/// always computed.
pub fn lower_select(circuit: &Circuit) -> Circuit {
    if circuit.count(|k| matches!(k, GateKind::Select(..))) == 0 {
        return circuit.clone();
    }
    let mut gates = Vec::with_capacity(circuit.gates.len());
    let mut map = Vec::with_capacity(circuit.gates.len());
    for g in &circuit.gates {
        let m = |x: GateId| map[x];
        let kind = match g.kind {
            GateKind::Select(c, a, b) => {
                let (c, a, b) = (m(c), m(a), m(b));
                let base = gates.len();
                gates.push(Gate { kind: GateKind::ScalarMul(-1, b), name: format!("{}__neg", g.name) });
                gates.push(Gate { kind: GateKind::Add(a, base), name: format!("{}__diff", g.name) });
                gates.push(Gate { kind: GateKind::Mul(c, base + 1), name: format!("{}__scaled", g.name) });
                GateKind::Add(base + 2, b)
            }
            GateKind::Input => GateKind::Input,
            GateKind::Add(a, b) => GateKind::Add(m(a), m(b)),
            GateKind::ScalarMul(k, a) => GateKind::ScalarMul(k, m(a)),
            GateKind::Mul(a, b) => GateKind::Mul(m(a), m(b)),
            GateKind::Output(a) => GateKind::Output(m(a)),
        };
        map.push(gates.len());
        gates.push(Gate { kind, name: g.name.clone() });
    }
    Circuit { gates }
}

/// Round and gate tallies; selects are costed after lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub rounds: usize,
    /// Linear gates: `add` and `smul`.
    pub adds: usize,
    pub muls: usize,
}

impl CostModel {
    /// Baseline degree-reduction traffic with `n` parties: adds are local,
    /// each mul is one all-to-all reshare.
    pub fn messages(&self, n: usize) -> u64 {
        (self.muls * n * n.saturating_sub(1)) as u64
    }
}

pub fn cost_model(circuit: &Circuit) -> CostModel {
    let c = lower_select(circuit);
    CostModel {
        rounds: c.mul_depth(),
        adds: c.count(GateKind::is_linear),
        muls: c.count(|k| matches!(k, GateKind::Mul(..))),
    }
}
