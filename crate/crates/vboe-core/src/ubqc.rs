//! Blind delegation: the client hides angles and outcomes behind one-time-pad
//! secrets while the server holds the actual quantum register.
//!
//! The quantum channel is in-process: "sending a qubit" appends it to the
//! shared [`Register`]. The server side of the interaction is a [`Server`]
//! implementation; it sees vertex labels, the register, and requested
//! measurement angles — never the secrets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::angle::{AngleIndex, PI};
use crate::graph::{Graph, MeasurementPattern, VertexId};
use crate::qstate::{prepare_qubit, Pauli, QuantumError, QubitKind, StateVector};

#[derive(Debug, Error, PartialEq)]
pub enum UbqcError {
    #[error("vertex {0} is not (or no longer) in the register")]
    UnknownLabel(VertexId),
    #[error("vertex {0} was pushed twice")]
    DuplicateLabel(VertexId),
    #[error("kernel failure: {0}")]
    Kernel(#[from] QuantumError),
}

/// The server-held quantum register: a statevector with one label per live
/// qubit. Measured qubits disappear together with their labels.
#[derive(Debug, Clone, Default)]
pub struct Register {
    state: Option<StateVector>,
    labels: Vec<VertexId>,
}

impl Register {
    pub fn new() -> Self {
        Register::default()
    }

    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn state(&self) -> Option<&StateVector> {
        self.state.as_ref()
    }

    fn index_of(&self, v: VertexId) -> Result<usize, UbqcError> {
        self.labels
            .iter()
            .position(|&w| w == v)
            .ok_or(UbqcError::UnknownLabel(v))
    }

    /// Appends a freshly prepared qubit under label `v`.
    pub fn push_qubit(&mut self, v: VertexId, kind: QubitKind) -> Result<(), UbqcError> {
        self.push_state(v, prepare_qubit(kind))
    }

    /// Appends an externally built single-qubit state under label `v`.
    pub fn push_state(&mut self, v: VertexId, qubit: StateVector) -> Result<(), UbqcError> {
        if self.labels.contains(&v) {
            return Err(UbqcError::DuplicateLabel(v));
        }
        self.state = Some(match self.state.take() {
            Some(s) => s.tensor(&qubit),
            None => qubit,
        });
        self.labels.push(v);
        Ok(())
    }

    fn with_state(
        &mut self,
        f: impl FnOnce(StateVector) -> Result<StateVector, QuantumError>,
    ) -> Result<(), UbqcError> {
        let s = self.state.take().ok_or(QuantumError::BadDistribution);
        self.state = Some(f(s?)?);
        Ok(())
    }

    pub fn apply_cz(&mut self, a: VertexId, b: VertexId) -> Result<(), UbqcError> {
        let (i, j) = (self.index_of(a)?, self.index_of(b)?);
        self.with_state(|s| s.apply_cz(i, j))
    }

    pub fn apply_pauli(&mut self, v: VertexId, p: Pauli) -> Result<(), UbqcError> {
        let q = self.index_of(v)?;
        self.with_state(|s| s.apply_pauli(q, p))
    }

    pub fn apply_rz(&mut self, v: VertexId, theta: AngleIndex) -> Result<(), UbqcError> {
        let q = self.index_of(v)?;
        self.with_state(|s| s.apply_rz(q, theta))
    }

    pub fn apply_h(&mut self, v: VertexId) -> Result<(), UbqcError> {
        let q = self.index_of(v)?;
        self.with_state(|s| s.apply_h(q))
    }

    pub fn apply_cnot(&mut self, control: VertexId, target: VertexId) -> Result<(), UbqcError> {
        let (c, t) = (self.index_of(control)?, self.index_of(target)?);
        self.with_state(|s| s.apply_cnot(c, t))
    }

    /// Measures label `v` in the `delta`-rotated basis and removes it.
    pub fn measure(
        &mut self,
        v: VertexId,
        delta: AngleIndex,
        rng: &mut dyn RngCore,
    ) -> Result<u8, UbqcError> {
        let q = self.index_of(v)?;
        let s = self.state.take().ok_or(QuantumError::BadDistribution)?;
        let (bit, rest) = s.measure_rotated(q, delta, rng)?;
        self.state = rest;
        self.labels.remove(q);
        Ok(bit)
    }

    /// Measures label `v` in the computational basis and removes it.
    pub fn measure_computational(
        &mut self,
        v: VertexId,
        rng: &mut dyn RngCore,
    ) -> Result<u8, UbqcError> {
        let q = self.index_of(v)?;
        let s = self.state.take().ok_or(QuantumError::BadDistribution)?;
        let (bit, rest) = s.measure_computational(q, rng)?;
        self.state = rest;
        self.labels.remove(q);
        Ok(bit)
    }
}

/// Server side of a delegated round. Defaults are the honest behavior; a
/// deviating server overrides the hooks it needs.
pub trait Server {
    /// Called after the client's qubit for `v` has landed in the register.
    fn on_receive(&mut self, _reg: &mut Register, _v: VertexId) -> Result<(), UbqcError> {
        Ok(())
    }

    /// Called once after all edge CZ gates have been applied.
    fn on_entangled(&mut self, _reg: &mut Register) -> Result<(), UbqcError> {
        Ok(())
    }

    /// Asked to measure `v` at `delta` and report a bit.
    fn measure(
        &mut self,
        reg: &mut Register,
        v: VertexId,
        delta: AngleIndex,
        rng: &mut dyn RngCore,
    ) -> Result<u8, UbqcError> {
        reg.measure(v, delta, rng)
    }
}

/// One-time-pad and blinding secrets for a round.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlindingSecrets {
    pub theta: BTreeMap<VertexId, AngleIndex>,
    pub r: BTreeMap<VertexId, u8>,
    /// X-pad on inputs; forced to 0 elsewhere.
    pub a_init: BTreeMap<VertexId, u8>,
    /// Neighbor-XOR propagation of `a_init`.
    pub a_prop: BTreeMap<VertexId, u8>,
}

impl BlindingSecrets {
    /// Recomputes `a_prop` from `a_init` over the graph.
    pub fn propagate(graph: &Graph, a_init: &BTreeMap<VertexId, u8>) -> BTreeMap<VertexId, u8> {
        graph
            .vertices()
            .iter()
            .map(|&v| {
                let p = graph
                    .neighbors(v)
                    .map(|j| a_init.get(&j).copied().unwrap_or(0))
                    .fold(0, |a, b| a ^ b);
                (v, p)
            })
            .collect()
    }

    /// Builds secrets from explicit tables, filling `a_prop`.
    pub fn from_parts(
        graph: &Graph,
        theta: BTreeMap<VertexId, AngleIndex>,
        r: BTreeMap<VertexId, u8>,
        a_init: BTreeMap<VertexId, u8>,
    ) -> Self {
        let a_prop = Self::propagate(graph, &a_init);
        BlindingSecrets {
            theta,
            r,
            a_init,
            a_prop,
        }
    }

    /// All-zero secrets (delegation degenerates to the plain protocol).
    pub fn trivial(graph: &Graph) -> Self {
        let zeros: BTreeMap<VertexId, u8> =
            graph.vertices().iter().map(|&v| (v, 0)).collect();
        let theta = graph
            .vertices()
            .iter()
            .map(|&v| (v, AngleIndex::new(0)))
            .collect();
        BlindingSecrets {
            theta,
            r: zeros.clone(),
            a_init: zeros.clone(),
            a_prop: zeros,
        }
    }
}

/// Uniform secrets: `a_init` on inputs, `r` everywhere, `theta` over the
/// eight angles.
pub fn sample_secrets(
    graph: &Graph,
    inputs: &BTreeSet<VertexId>,
    rng: &mut dyn RngCore,
) -> BlindingSecrets {
    let mut theta = BTreeMap::new();
    let mut r = BTreeMap::new();
    let mut a_init = BTreeMap::new();
    for &v in graph.vertices() {
        theta.insert(v, AngleIndex::new(rng.random_range(0..8)));
        r.insert(v, rng.random_range(0..2u8));
        a_init.insert(v, if inputs.contains(&v) { rng.random_range(0..2u8) } else { 0 });
    }
    BlindingSecrets::from_parts(graph, theta, r, a_init)
}

/// Masked measurement angle:
/// `delta = (-1)^{a_init} phi' + theta + (r + a_prop) pi`.
pub fn blind_angle(phi_prime: AngleIndex, secrets: &BlindingSecrets, v: VertexId) -> AngleIndex {
    phi_prime.negate_if(secrets.a_init[&v]) + secrets.theta[&v]
        + if (secrets.r[&v] ^ secrets.a_prop[&v]) & 1 == 1 { PI } else { AngleIndex::new(0) }
}

/// Which role a delegated round plays; test rounds carry the chosen color.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RoundKind {
    Computation,
    Test(usize),
}

/// Message log of one delegated round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundTranscript {
    /// Classical description of each transmitted qubit, in send order.
    pub sent: Vec<(VertexId, QubitKind)>,
    /// Blinded angles in measurement order.
    pub deltas: Vec<(VertexId, AngleIndex)>,
    /// Server answers per vertex.
    pub bits: BTreeMap<VertexId, u8>,
    pub secrets: BlindingSecrets,
    pub round_kind: RoundKind,
}

/// `s_X` / `s_Z` with the one-time pad stripped (`b_j XOR r_j`), forced to 0
/// on inputs.
pub(crate) fn padded_corrections(
    pattern: &MeasurementPattern,
    secrets: &BlindingSecrets,
    bits: &BTreeMap<VertexId, u8>,
    v: VertexId,
) -> (u8, u8) {
    if pattern.inputs.contains(&v) {
        return (0, 0);
    }
    let deps = pattern.dependency_sets(v).expect("vertex in pattern");
    let strip = |set: &BTreeSet<VertexId>| {
        set.iter()
            .map(|j| bits.get(j).copied().unwrap_or(0) ^ secrets.r[j])
            .fold(0, |a, b| a ^ b)
    };
    (strip(&deps.s_x), strip(&deps.s_z))
}

/// Runs one blinded round with the given secrets; returns the transcript and
/// the decoded output bits (sorted output vertices, `b XOR r`).
pub fn run_ubqc_round_with_secrets(
    pattern: &MeasurementPattern,
    secrets: &BlindingSecrets,
    server: &mut dyn Server,
    rng: &mut dyn RngCore,
) -> Result<(RoundTranscript, Vec<u8>), UbqcError> {
    let mut reg = Register::new();
    let mut sent = Vec::new();
    // With the |+>^{|I|} honest input, the X pad acts trivially on the state;
    // every vertex physically travels as |+_theta>.
    for &v in pattern.graph.vertices() {
        let kind = QubitKind::PlusTheta(secrets.theta[&v]);
        reg.push_qubit(v, kind)?;
        sent.push((v, kind));
        server.on_receive(&mut reg, v)?;
    }
    for &(a, b) in pattern.graph.edges() {
        reg.apply_cz(a, b)?;
    }
    server.on_entangled(&mut reg)?;

    let mut bits = BTreeMap::new();
    let mut deltas = Vec::new();
    for &v in &pattern.flow.order {
        let (s_x, s_z) = padded_corrections(pattern, secrets, &bits, v);
        let phi_prime = crate::graph::update_angle(pattern.angles[&v], s_x, s_z);
        let delta = blind_angle(phi_prime, secrets, v);
        let b = server.measure(&mut reg, v, delta, rng)?;
        deltas.push((v, delta));
        bits.insert(v, b);
    }
    let decoded = pattern
        .outputs
        .iter()
        .map(|v| bits[v] ^ secrets.r[v])
        .collect();
    Ok((
        RoundTranscript {
            sent,
            deltas,
            bits,
            secrets: secrets.clone(),
            round_kind: RoundKind::Computation,
        },
        decoded,
    ))
}

/// Runs one blinded round with freshly sampled secrets.
pub fn run_ubqc_round(
    pattern: &MeasurementPattern,
    server: &mut dyn Server,
    rng: &mut dyn RngCore,
) -> Result<(RoundTranscript, Vec<u8>), UbqcError> {
    let secrets = sample_secrets(&pattern.graph, &pattern.inputs, rng);
    run_ubqc_round_with_secrets(pattern, &secrets, server, rng)
}

/// Classical post-map a deviating server can impose on the ideal resource's
/// output bits.
pub type OutputDeviation<'a> = &'a mut dyn FnMut(&[u8], &mut dyn RngCore) -> Vec<u8>;

/// Ideal blind-delegation resource: computes the correct output, then applies
/// the deviation post-map if one is registered.
pub fn bdqc_ideal(
    pattern: &MeasurementPattern,
    deviation: Option<OutputDeviation<'_>>,
    rng: &mut dyn RngCore,
) -> Result<Vec<u8>, crate::dmbqc::DmbqcError> {
    let honest = crate::dmbqc::run_dmbqc(pattern, None, rng)?.output_bits;
    Ok(match deviation {
        Some(f) => f(&honest, rng),
        None => honest,
    })
}

/// The EPR-pair reformulation of the blinded round: the simulator hands the
/// server halves of EPR pairs and uniformly random angles; the resource part
/// recovers the pad bits by measuring its halves afterwards.
///
/// Resource-half labels live in a disjoint id space so the server can never
/// address them.
pub fn epr_split_round(
    pattern: &MeasurementPattern,
    server: &mut dyn Server,
    rng: &mut dyn RngCore,
) -> Result<(RoundTranscript, Vec<u8>), UbqcError> {
    const RESOURCE: VertexId = 1 << 30;
    const INPUT: VertexId = 1 << 29;
    let mut reg = Register::new();
    let mut sent = Vec::new();
    // Simulator part: one EPR pair per vertex, server half labeled v.
    for &v in pattern.graph.vertices() {
        reg.push_qubit(RESOURCE | v, QubitKind::Computational(0))?;
        reg.push_qubit(v, QubitKind::Computational(0))?;
        reg.apply_h(RESOURCE | v)?;
        reg.apply_cnot(RESOURCE | v, v)?;
        sent.push((v, QubitKind::Computational(0)));
        server.on_receive(&mut reg, v)?;
    }
    for &(a, b) in pattern.graph.edges() {
        reg.apply_cz(a, b)?;
    }
    server.on_entangled(&mut reg)?;

    // Simulator part: uniform angles, collect answers.
    let mut bits = BTreeMap::new();
    let mut deltas = Vec::new();
    for &v in &pattern.flow.order {
        let delta = AngleIndex::new(rng.random_range(0..8));
        let b = server.measure(&mut reg, v, delta, rng)?;
        deltas.push((v, delta));
        bits.insert(v, b);
    }
    let delta_of: BTreeMap<VertexId, AngleIndex> = deltas.iter().copied().collect();

    // Resource part: teleport |+> inputs through the kept halves, recording
    // the X pad.
    let mut a_init: BTreeMap<VertexId, u8> = BTreeMap::new();
    for &v in pattern.graph.vertices() {
        if pattern.inputs.contains(&v) {
            reg.push_qubit(INPUT | v, QubitKind::PlusTheta(AngleIndex::new(0)))?;
            reg.apply_cnot(INPUT | v, RESOURCE | v)?;
            let a = reg.measure_computational(RESOURCE | v, rng)?;
            a_init.insert(v, a);
        } else {
            a_init.insert(v, 0);
        }
    }
    let a_prop = BlindingSecrets::propagate(&pattern.graph, &a_init);

    // Resource part: rotate, Hadamard, measure — recovering the Z pad.
    let mut r: BTreeMap<VertexId, u8> = BTreeMap::new();
    for &v in &pattern.flow.order {
        let (s_x, s_z) = {
            if pattern.inputs.contains(&v) {
                (0, 0)
            } else {
                let deps = pattern.dependency_sets(v).expect("vertex in pattern");
                let strip = |set: &BTreeSet<VertexId>| {
                    set.iter().map(|j| bits[j] ^ r[j]).fold(0, |a, b| a ^ b)
                };
                (strip(&deps.s_x), strip(&deps.s_z))
            }
        };
        let phi_prime = crate::graph::update_angle(pattern.angles[&v], s_x, s_z);
        // The teleportation applies the X pad after the collapse, so the
        // compensating rotation must carry the (-1)^a sign on delta as well:
        // theta' = (-1)^a (delta - phi') - a_prop*pi.
        let theta_prime = (delta_of[&v] - phi_prime).negate_if(a_init[&v])
            - if a_prop[&v] & 1 == 1 { PI } else { AngleIndex::new(0) };
        let label = if pattern.inputs.contains(&v) { INPUT | v } else { RESOURCE | v };
        reg.apply_rz(label, theta_prime)?;
        reg.apply_h(label)?;
        let rv = reg.measure_computational(label, rng)?;
        r.insert(v, rv);
    }

    let decoded = pattern.outputs.iter().map(|v| bits[v] ^ r[v]).collect();
    let theta = pattern
        .graph
        .vertices()
        .iter()
        .map(|&v| (v, AngleIndex::new(0)))
        .collect();
    let secrets = BlindingSecrets {
        theta,
        r,
        a_init,
        a_prop,
    };
    Ok((
        RoundTranscript {
            sent,
            deltas,
            bits,
            secrets,
            round_kind: RoundKind::Computation,
        },
        decoded,
    ))
}

/// The honest server: follows every instruction exactly (all trait defaults).
#[derive(Debug, Default, Clone, Copy)]
pub struct HonestServer;

impl Server for HonestServer {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmbqc::output_one_probability;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn freq_ubqc(pattern: &MeasurementPattern, trials: u32, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ones = 0u32;
        for _ in 0..trials {
            let (_, out) = run_ubqc_round(pattern, &mut HonestServer, &mut rng).unwrap();
            ones += u32::from(out[0]);
        }
        f64::from(ones) / f64::from(trials)
    }

    #[test]
    fn blind_angle_formula_cases() {
        let g = Graph::path(2);
        let mk = |theta0: i64, r0: u8, a0: u8| {
            let theta = BTreeMap::from([(0, AngleIndex::new(theta0)), (1, AngleIndex::new(0))]);
            let r = BTreeMap::from([(0, r0), (1, 0)]);
            let a_init = BTreeMap::from([(0, a0), (1, 0)]);
            BlindingSecrets::from_parts(&g, theta, r, a_init)
        };
        // All zero: delta = phi'.
        assert_eq!(blind_angle(AngleIndex::new(3), &mk(0, 0, 0), 0), AngleIndex::new(3));
        // a_init=1, phi'=1, theta=1, r=1, a_prop(0)=0: (-1 + 1 + 4) mod 8 = 4.
        assert_eq!(blind_angle(AngleIndex::new(1), &mk(1, 1, 1), 0), AngleIndex::new(4));
        // r=1 alone: pi shift.
        assert_eq!(blind_angle(AngleIndex::new(2), &mk(0, 1, 0), 0), AngleIndex::new(6));
        // a_prop from the neighbor's a_init: vertex 1 sees a_prop = a_init(0).
        let s = mk(0, 0, 1);
        assert_eq!(s.a_prop[&1], 1);
        assert_eq!(blind_angle(AngleIndex::new(0), &s, 1), AngleIndex::new(4));
    }

    #[test]
    fn secrets_respect_input_restriction() {
        let g = Graph::path(3);
        let inputs = BTreeSet::from([0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = sample_secrets(&g, &inputs, &mut rng);
            assert_eq!(s.a_init[&1], 0);
            assert_eq!(s.a_init[&2], 0);
            assert_eq!(s.a_prop[&1], s.a_init[&0]);
        }
    }

    #[test]
    fn honest_round_matches_plain_execution() {
        // Delegated and plain runs are two samplers of one distribution.
        let angles = [AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)];
        let pat = MeasurementPattern::path(3, &angles);
        let p = output_one_probability(&pat, None).unwrap();
        let trials = 20_000;
        let freq = freq_ubqc(&pat, trials, 21);
        assert!(
            (freq - p).abs() < 5.0 * 0.5 / f64::from(trials).sqrt(),
            "{freq} vs {p}"
        );
    }

    #[test]
    fn trivial_secrets_reproduce_plain_protocol_exactly() {
        let angles = [AngleIndex::new(2), AngleIndex::new(5), AngleIndex::new(0)];
        let pat = MeasurementPattern::path(3, &angles);
        let secrets = BlindingSecrets::trivial(&pat.graph);
        let p = output_one_probability(&pat, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let trials = 20_000u32;
        let mut ones = 0u32;
        for _ in 0..trials {
            let (_, out) =
                run_ubqc_round_with_secrets(&pat, &secrets, &mut HonestServer, &mut rng).unwrap();
            ones += u32::from(out[0]);
        }
        let freq = f64::from(ones) / f64::from(trials);
        assert!((freq - p).abs() < 5.0 * 0.5 / f64::from(trials).sqrt());
    }

    #[test]
    fn all_zero_answers_decode_to_pad_bits() {
        struct ZeroServer;
        impl Server for ZeroServer {
            fn measure(
                &mut self,
                reg: &mut Register,
                v: VertexId,
                delta: AngleIndex,
                rng: &mut dyn RngCore,
            ) -> Result<u8, UbqcError> {
                reg.measure(v, delta, rng)?;
                Ok(0)
            }
        }
        let pat = MeasurementPattern::path(2, &[AngleIndex::new(0); 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 4000u32;
        let mut ones = 0u32;
        for _ in 0..trials {
            let secrets = sample_secrets(&pat.graph, &pat.inputs, &mut rng);
            let (_, out) =
                run_ubqc_round_with_secrets(&pat, &secrets, &mut ZeroServer, &mut rng).unwrap();
            assert_eq!(out[0], secrets.r[&1]);
            ones += u32::from(out[0]);
        }
        // ... hence uniform output.
        let freq = f64::from(ones) / f64::from(trials);
        assert!((freq - 0.5).abs() < 5.0 * 0.5 / f64::from(trials).sqrt());
    }

    #[test]
    fn bdqc_ideal_applies_post_maps() {
        let pat = MeasurementPattern::path(3, &[AngleIndex::new(0); 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Honest path computes p = 0 for the all-zero path deterministically.
        for _ in 0..20 {
            assert_eq!(bdqc_ideal(&pat, None, &mut rng).unwrap(), alloc::vec![0]);
        }
        let mut flip = |bits: &[u8], _: &mut dyn RngCore| {
            bits.iter().map(|b| b ^ 1).collect::<Vec<u8>>()
        };
        assert_eq!(bdqc_ideal(&pat, Some(&mut flip), &mut rng).unwrap(), alloc::vec![1]);
        let mut zero = |_: &[u8], _: &mut dyn RngCore| alloc::vec![0u8];
        assert_eq!(bdqc_ideal(&pat, Some(&mut zero), &mut rng).unwrap(), alloc::vec![0]);
    }

    #[test]
    fn epr_round_matches_direct_round() {
        let angles = [AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)];
        let pat = MeasurementPattern::path(3, &angles);
        let p = output_one_probability(&pat, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let trials = 20_000u32;
        let mut ones = 0u32;
        for _ in 0..trials {
            let (_, out) = epr_split_round(&pat, &mut HonestServer, &mut rng).unwrap();
            ones += u32::from(out[0]);
        }
        let freq = f64::from(ones) / f64::from(trials);
        assert!(
            (freq - p).abs() < 5.0 * 0.5 / f64::from(trials).sqrt(),
            "{freq} vs {p}"
        );
    }

    #[test]
    fn epr_round_delta_marginal_is_uniform_by_construction() {
        let pat = MeasurementPattern::path(2, &[AngleIndex::new(3), AngleIndex::new(0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = [0u32; 8];
        let trials = 8000u32;
        for _ in 0..trials {
            let (t, _) = epr_split_round(&pat, &mut HonestServer, &mut rng).unwrap();
            counts[t.deltas[0].1.index() as usize] += 1;
        }
        for c in counts {
            let f = f64::from(c) / f64::from(trials);
            assert!((f - 0.125).abs() < 5.0 * (0.125f64 * 0.875 / f64::from(trials)).sqrt());
        }
    }

    #[test]
    fn register_rejects_unknown_and_duplicate_labels() {
        let mut reg = Register::new();
        reg.push_qubit(3, QubitKind::Computational(0)).unwrap();
        assert_eq!(
            reg.push_qubit(3, QubitKind::Computational(0)),
            Err(UbqcError::DuplicateLabel(3))
        );
        assert!(matches!(reg.apply_pauli(5, Pauli::X), Err(UbqcError::UnknownLabel(5))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            reg.measure(9, AngleIndex::new(0), &mut rng),
            Err(UbqcError::UnknownLabel(9))
        ));
    }
}
