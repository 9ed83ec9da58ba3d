//! Measurement-based execution of a pattern with adaptive corrections.
//!
//! All vertices are measured (classical output): outputs carry angle 0 and the
//! `s_z` correction lands in the measurement angle, so raw outcomes on output
//! vertices are already the corrected result bits.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::RngCore;
use thiserror::Error;

use crate::angle::AngleIndex;
use crate::graph::{update_angle, MeasurementPattern, VertexId};
use crate::qstate::{QuantumError, StateVector, TOL};

#[derive(Debug, Error, PartialEq)]
pub enum DmbqcError {
    #[error("input state has {got} qubits but the pattern has {want} inputs")]
    InputSizeMismatch { got: usize, want: usize },
    #[error("kernel failure: {0}")]
    Kernel(#[from] QuantumError),
}

/// Full record of one pattern execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmbqcOutcome {
    /// Raw outcome of every vertex.
    pub bits: BTreeMap<VertexId, u8>,
    /// Outcomes of the output vertices in ascending vertex order.
    pub output_bits: Vec<u8>,
}

/// Tracks which vertex sits at which qubit index of a shrinking register.
struct AliveRegister {
    state: Option<StateVector>,
    vertices: Vec<VertexId>,
}

impl AliveRegister {
    fn index_of(&self, v: VertexId) -> usize {
        self.vertices.iter().position(|&w| w == v).expect("vertex alive")
    }
}

/// Initial register: input state on the sorted input vertices, `|+>` on the
/// rest, then CZ along every edge.
fn initial_register(
    pattern: &MeasurementPattern,
    input_state: Option<&StateVector>,
) -> Result<AliveRegister, DmbqcError> {
    let inputs: Vec<VertexId> = pattern.inputs.iter().copied().collect();
    let rest: Vec<VertexId> = pattern
        .graph
        .vertices()
        .iter()
        .copied()
        .filter(|v| !pattern.inputs.contains(v))
        .collect();

    let mut vertices = inputs.clone();
    vertices.extend(&rest);

    let mut state = match input_state {
        Some(s) => {
            if s.num_qubits() != inputs.len() {
                return Err(DmbqcError::InputSizeMismatch {
                    got: s.num_qubits(),
                    want: inputs.len(),
                });
            }
            s.clone()
        }
        None => {
            if inputs.is_empty() {
                // No inputs: whole register is fresh |+> qubits.
                let s = StateVector::plus(vertices.len());
                let reg = AliveRegister {
                    state: Some(entangle_all(pattern, s, &vertices)?),
                    vertices,
                };
                return Ok(reg);
            }
            StateVector::plus(inputs.len())
        }
    };
    if !rest.is_empty() {
        state = state.tensor(&StateVector::plus(rest.len()));
    }
    Ok(AliveRegister {
        state: Some(entangle_all(pattern, state, &vertices)?),
        vertices,
    })
}

fn entangle_all(
    pattern: &MeasurementPattern,
    mut state: StateVector,
    vertices: &[VertexId],
) -> Result<StateVector, DmbqcError> {
    let idx: BTreeMap<VertexId, usize> =
        vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    for &(a, b) in pattern.graph.edges() {
        state = state.apply_cz(idx[&a], idx[&b])?;
    }
    Ok(state)
}

/// Corrected measurement angle for `v` given the raw outcomes so far.
pub fn corrected_angle(
    pattern: &MeasurementPattern,
    v: VertexId,
    bits: &BTreeMap<VertexId, u8>,
) -> AngleIndex {
    let deps = pattern.dependency_sets(v).expect("vertex in pattern");
    let s_x = deps.s_x.iter().filter_map(|j| bits.get(j)).fold(0, |a, b| a ^ b);
    let s_z = deps.s_z.iter().filter_map(|j| bits.get(j)).fold(0, |a, b| a ^ b);
    update_angle(pattern.angles[&v], s_x, s_z)
}

/// Runs the pattern once, sampling every measurement.
pub fn run_dmbqc(
    pattern: &MeasurementPattern,
    input_state: Option<&StateVector>,
    rng: &mut dyn RngCore,
) -> Result<DmbqcOutcome, DmbqcError> {
    let mut reg = initial_register(pattern, input_state)?;
    let mut bits = BTreeMap::new();
    for &v in &pattern.flow.order {
        let delta = corrected_angle(pattern, v, &bits);
        let q = reg.index_of(v);
        let state = reg.state.take().expect("register not exhausted");
        let (b, rest) = state.measure_rotated(q, delta, rng)?;
        reg.state = rest;
        reg.vertices.remove(q);
        bits.insert(v, b);
    }
    let output_bits = pattern.outputs.iter().map(|v| bits[v]).collect();
    Ok(DmbqcOutcome { bits, output_bits })
}

/// Exact distribution over output bitstrings by enumerating every measurement
/// branch. Index `k` holds the probability of the output string whose bit `i`
/// (little-endian) is the outcome of the `i`-th output vertex in ascending
/// order.
pub fn output_distribution(
    pattern: &MeasurementPattern,
    input_state: Option<&StateVector>,
) -> Result<Vec<f64>, DmbqcError> {
    let reg = initial_register(pattern, input_state)?;
    let outputs = pattern.sorted_outputs();
    let mut dist = alloc::vec![0.0; 1 << outputs.len()];
    // (branch weight, remaining state, live vertices, outcomes so far, step)
    type Branch = (f64, Option<StateVector>, Vec<VertexId>, BTreeMap<VertexId, u8>, usize);
    let mut stack: Vec<Branch> = alloc::vec![(1.0, reg.state, reg.vertices, BTreeMap::new(), 0)];
    while let Some((weight, state, vertices, bits, step)) = stack.pop() {
        if step == pattern.flow.order.len() {
            let mut k = 0usize;
            for (i, v) in outputs.iter().enumerate() {
                k |= (bits[v] as usize) << i;
            }
            dist[k] += weight;
            continue;
        }
        let v = pattern.flow.order[step];
        let delta = corrected_angle(pattern, v, &bits);
        let state = state.expect("register not exhausted");
        let q = vertices.iter().position(|&w| w == v).expect("vertex alive");
        let branches = state.measurement_branches(q, delta)?;
        let mut rest_vertices = vertices;
        rest_vertices.remove(q);
        for (b, (p, branch)) in branches.into_iter().enumerate() {
            if p < TOL * TOL {
                continue;
            }
            let mut bits_b = bits.clone();
            bits_b.insert(v, b as u8);
            stack.push((weight * p, branch, rest_vertices.clone(), bits_b, step + 1));
        }
    }
    Ok(dist)
}

/// Exact probability that a single-output pattern yields output bit 1.
pub fn output_one_probability(
    pattern: &MeasurementPattern,
    input_state: Option<&StateVector>,
) -> Result<f64, DmbqcError> {
    let dist = output_distribution(pattern, input_state)?;
    // Bit 0 of the index is the lowest-numbered output vertex.
    Ok(dist.iter().enumerate().filter(|(k, _)| k & 1 == 1).map(|(_, w)| w).sum())
}
