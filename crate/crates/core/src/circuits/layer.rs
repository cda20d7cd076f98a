//! Adaptable feed-forward layering.
//!
//! Gates are grouped into alternating addition and multiplication layers:
//! `A0, M1, A1, M2, A2, ...`, where `Mk` holds the multiplications at
//! multiplicative depth `k` and `Ak` the linear gates at depth `k`. After
//! every multiplication layer the intermediate state moves to a committee
//! `c` times smaller.

use super::{lower_select, Circuit, CircuitError, GateId, GateKind};
use crate::field::{Fe, Field};

/// No stage ever runs with fewer parties than this.
pub const MIN_QUORUM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Add,
    Mul,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub kind: LayerKind,
    /// Multiplicative depth; `Mul` layer `k` feeds `Add` layer `k`.
    pub depth: usize,
    pub gates: Vec<GateId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredCircuit {
    /// The select-free circuit the layer gate ids refer to.
    pub circuit: Circuit,
    pub layers: Vec<Layer>,
    /// `schedule[k]` parties run `Add` layer `k` and `Mul` layer `k+1`.
    pub schedule: Vec<usize>,
}

impl LayeredCircuit {
    /// Party count of the committee evaluating `layer`.
    pub fn parties_for(&self, layer: &Layer) -> usize {
        match layer.kind {
            LayerKind::Add => self.schedule[layer.depth],
            LayerKind::Mul => self.schedule[layer.depth - 1],
        }
    }

    pub fn mul_layers(&self) -> usize {
        self.schedule.len() - 1
    }

    /// Evaluates layer by layer, inputs and outputs as in the source circuit.
    pub fn eval_plain(&self, field: Field, inputs: &[Fe]) -> Result<Vec<Fe>, CircuitError> {
        let gates = self.circuit.gates();
        let ins = self.circuit.inputs();
        if inputs.len() != ins.len() {
            return Err(CircuitError::ArityMismatch { expected: ins.len(), got: inputs.len() });
        }
        let mut vals: Vec<Option<Fe>> = vec![None; gates.len()];
        for (g, v) in ins.iter().zip(inputs) {
            vals[*g] = Some(*v);
        }
        let get = |vals: &[Option<Fe>], g: GateId| vals[g].expect("layer order respects dependencies");
        for layer in &self.layers {
            for &g in &layer.gates {
                vals[g] = Some(match gates[g].kind {
                    GateKind::Add(a, b) => get(&vals, a) + get(&vals, b),
                    GateKind::ScalarMul(k, a) => field.from_i128(k) * get(&vals, a),
                    GateKind::Mul(a, b) => get(&vals, a) * get(&vals, b),
                    _ => unreachable!("only arithmetic gates are layered"),
                });
            }
        }
        Ok(self
            .circuit
            .outputs()
            .into_iter()
            .map(|o| match gates[o].kind {
                GateKind::Output(a) => get(&vals, a),
                _ => unreachable!(),
            })
            .collect())
    }
}

pub fn layerize(circuit: &Circuit, n: usize, c: usize) -> Result<LayeredCircuit, CircuitError> {
    layerize_with_floor(circuit, n, c, MIN_QUORUM)
}

/// `floor` is raised to at least [`MIN_QUORUM`]; engines pass `t+1`.
pub fn layerize_with_floor(circuit: &Circuit, n: usize, c: usize, floor: usize) -> Result<LayeredCircuit, CircuitError> {
    if c < 2 || n < c {
        return Err(CircuitError::InvalidFactor { n, c });
    }
    let circuit = lower_select(circuit);
    let depths = circuit.mul_depths();
    let d = circuit.mul_depth();
    let mut layers = Vec::with_capacity(2 * d + 1);
    for k in 0..=d {
        if k > 0 {
            layers.push(Layer { kind: LayerKind::Mul, depth: k, gates: Vec::new() });
        }
        layers.push(Layer { kind: LayerKind::Add, depth: k, gates: Vec::new() });
    }
    for (g, gate) in circuit.gates().iter().enumerate() {
        let k = depths[g];
        match gate.kind {
            GateKind::Mul(..) => layers[2 * k - 1].gates.push(g),
            GateKind::Add(..) | GateKind::ScalarMul(..) => layers[2 * k].gates.push(g),
            _ => {}
        }
    }
    let floor = floor.max(MIN_QUORUM);
    let mut schedule = Vec::with_capacity(d + 1);
    let mut div = 1usize;
    for _ in 0..=d {
        schedule.push(n.div_ceil(div).max(floor).min(n));
        div = div.saturating_mul(c);
    }
    Ok(LayeredCircuit { circuit, layers, schedule })
}
