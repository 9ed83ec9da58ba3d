//! Exact enumeration of the server's view of a blinded round.
//!
//! Fix a deterministic server answer string `b`. The offset `c_v = δ_v − θ_v`
//! is a function of `(r, a, b)` and the pattern angles only — θ never enters
//! it. With θ uniform, the view therefore splits as: δ exactly uniform, and,
//! conditioned on δ, the transmitted register in the mixed state
//! `ρ(δ) = Σ_c w(c) ⊗_v |+_{δ_v−c_v}⟩⟨+_{δ_v−c_v}|`.
//! Since `⊗|+_{δ−c}⟩ = Rz(δ) ⊗|+_{−c}⟩` up to phase, all conditional states
//! are a fixed local rotation of `ρ(0)`; two views agree for every δ exactly
//! when they agree at δ = 0. Small patterns let us tabulate `w(c)` exactly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::angle::AngleIndex;
use crate::graph::{Flow, Graph, MeasurementPattern, VertexId};
use crate::qstate::{prepare_qubit, DensityMatrix, QubitKind, StateVector};
use crate::ubqc::{blind_angle, padded_corrections, BlindingSecrets};

/// Exact server view for one deterministic answer string: the distribution
/// of the angle-offset tuple `c` (indexed in ascending vertex order).
#[derive(Debug, Clone, PartialEq)]
pub struct ServerView {
    pub c_weights: BTreeMap<Vec<u8>, f64>,
    pub vertices: Vec<VertexId>,
}

/// Tabulates the offset distribution by enumerating all `2^n` r and `2^|I|`
/// a assignments with uniform weight.
pub fn server_view(
    pattern: &MeasurementPattern,
    answers: &BTreeMap<VertexId, u8>,
) -> ServerView {
    let vertices: Vec<VertexId> = pattern.graph.vertices().to_vec();
    let n = vertices.len();
    let inputs: Vec<VertexId> = pattern.inputs.iter().copied().collect();
    let w = 1.0 / ((1usize << n) * (1usize << inputs.len())) as f64;
    let theta_zero: BTreeMap<VertexId, AngleIndex> = vertices
        .iter()
        .map(|&v| (v, AngleIndex::new(0)))
        .collect();

    let mut c_weights: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    for r_code in 0..(1usize << n) {
        let r: BTreeMap<VertexId, u8> = vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, ((r_code >> i) & 1) as u8))
            .collect();
        for a_code in 0..(1usize << inputs.len()) {
            let mut a_init: BTreeMap<VertexId, u8> = vertices.iter().map(|&v| (v, 0)).collect();
            for (i, &v) in inputs.iter().enumerate() {
                a_init.insert(v, ((a_code >> i) & 1) as u8);
            }
            let secrets = BlindingSecrets::from_parts(
                &pattern.graph,
                theta_zero.clone(),
                r.clone(),
                a_init,
            );
            // With theta = 0 the blinded angle *is* the offset c_v.
            let mut c = BTreeMap::new();
            for &v in &pattern.flow.order {
                let (s_x, s_z) = padded_corrections(pattern, &secrets, answers, v);
                let phi_prime = crate::graph::update_angle(pattern.angles[&v], s_x, s_z);
                c.insert(v, blind_angle(phi_prime, &secrets, v).index());
            }
            let key: Vec<u8> = vertices.iter().map(|v| c[v]).collect();
            *c_weights.entry(key).or_insert(0.0) += w;
        }
    }
    ServerView {
        c_weights,
        vertices,
    }
}

/// Conditional state of the transmitted register given the δ tuple (ascending
/// vertex order): the `w(c)`-mixture of `⊗ |+_{δ_v − c_v}⟩`.
pub fn conditional_density(view: &ServerView, deltas: &[u8]) -> DensityMatrix {
    assert_eq!(deltas.len(), view.vertices.len());
    let mut rho = DensityMatrix::zeros(view.vertices.len());
    for (c, &w) in &view.c_weights {
        let mut state: Option<StateVector> = None;
        for (i, &cv) in c.iter().enumerate() {
            let angle = AngleIndex::new(i64::from(deltas[i])) - AngleIndex::new(i64::from(cv));
            let q = prepare_qubit(QubitKind::PlusTheta(angle));
            state = Some(match state {
                Some(s) => s.tensor(&q),
                None => q,
            });
        }
        rho.accumulate_pure(w, &state.expect("nonempty pattern"))
            .expect("dimension match");
    }
    rho
}

/// Largest entrywise gap between the conditional states of two views at the
/// same δ. By the rotation argument above, δ = 0 decides equality for all δ.
pub fn view_distance_at(a: &ServerView, b: &ServerView, deltas: &[u8]) -> f64 {
    conditional_density(a, deltas).max_abs_diff(&conditional_density(b, deltas))
}

/// Worst deviation of any single-δ marginal from the uniform 1/8. The
/// marginal is the convolution of the offset distribution with the uniform θ;
/// this evaluates it explicitly from the tabulated weights.
pub fn delta_marginal_deviation(view: &ServerView) -> f64 {
    let n = view.vertices.len();
    let mut dev: f64 = 0.0;
    for pos in 0..n {
        let mut marginal = [0.0f64; 8];
        for (c, w) in &view.c_weights {
            for theta in 0..8u8 {
                marginal[usize::from((theta + c[pos]) % 8)] += w / 8.0;
            }
        }
        for p in marginal {
            dev = dev.max((p - 0.125).abs());
        }
    }
    dev
}

/// Transmitted register averaged over all secrets: mixture of `⊗|+_θ⟩` over
/// uniform θ (blindness predicts the maximally mixed state).
pub fn average_sent_density(n: usize) -> DensityMatrix {
    let mut rho = DensityMatrix::zeros(n);
    let total = 8usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut state: Option<StateVector> = None;
        for _ in 0..n {
            let q = prepare_qubit(QubitKind::PlusTheta(AngleIndex::new((c % 8) as i64)));
            c /= 8;
            state = Some(match state {
                Some(s) => s.tensor(&q),
                None => q,
            });
        }
        rho.accumulate_pure(1.0 / total as f64, &state.expect("n >= 1"))
            .expect("dimension match");
    }
    rho
}

fn permutations(items: &[VertexId]) -> Vec<Vec<VertexId>> {
    if items.is_empty() {
        return alloc::vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Every pattern shape with at most `max_n` vertices: all labeled graphs, all
/// input/output subsets, one valid flow each (first found over all maps and
/// measurement orders). Angles are left at zero for the caller to assign.
pub fn enumerate_patterns(max_n: u32) -> Vec<MeasurementPattern> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        let vertices: Vec<VertexId> = (0..n).collect();
        let all_edges: Vec<(VertexId, VertexId)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        for edge_code in 0..(1usize << all_edges.len()) {
            let edges: Vec<(VertexId, VertexId)> = all_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| (edge_code >> i) & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let graph = Graph::new(vertices.iter().copied(), edges.iter().copied()).unwrap();
            for in_code in 0..(1usize << n) {
                for out_code in 1..(1usize << n) {
                    let inputs: Vec<VertexId> = vertices
                        .iter()
                        .copied()
                        .filter(|v| (in_code >> v) & 1 == 1)
                        .collect();
                    let outputs: Vec<VertexId> = vertices
                        .iter()
                        .copied()
                        .filter(|v| (out_code >> v) & 1 == 1)
                        .collect();
                    let domain: Vec<VertexId> = vertices
                        .iter()
                        .copied()
                        .filter(|v| !outputs.contains(v))
                        .collect();
                    let range: Vec<VertexId> = vertices
                        .iter()
                        .copied()
                        .filter(|v| !inputs.contains(v))
                        .collect();
                    if let Some(p) = first_valid_pattern(&graph, &inputs, &outputs, &domain, &range)
                    {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn first_valid_pattern(
    graph: &Graph,
    inputs: &[VertexId],
    outputs: &[VertexId],
    domain: &[VertexId],
    range: &[VertexId],
) -> Option<MeasurementPattern> {
    let vertices: Vec<VertexId> = graph.vertices().to_vec();
    let d = domain.len();
    if d > 0 && range.is_empty() {
        return None;
    }
    // All functions domain -> range as digit strings; injectivity and the
    // flow conditions are left to the validator.
    let fn_count = if d == 0 { 1 } else { range.len().checked_pow(d as u32)? };
    for code in 0..fn_count {
        let mut map = Vec::with_capacity(d);
        let mut c = code;
        for &v in domain {
            map.push((v, range[c % range.len()]));
            c /= range.len();
        }
        for order in permutations(&vertices) {
            let flow = Flow::new(map.iter().copied(), order.iter().copied());
            let pat = MeasurementPattern::new(
                graph.clone(),
                inputs.iter().copied(),
                outputs.iter().copied(),
                vertices.iter().map(|&v| (v, AngleIndex::new(0))),
                flow,
            );
            if let Ok(p) = pat {
                return Some(p);
            }
        }
    }
    None
}

/// Enumerates all `2^n` deterministic answer strings for a pattern.
pub fn answer_strings(pattern: &MeasurementPattern) -> Vec<BTreeMap<VertexId, u8>> {
    let vertices: Vec<VertexId> = pattern.graph.vertices().to_vec();
    (0..(1usize << vertices.len()))
        .map(|code| {
            vertices
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, ((code >> i) & 1) as u8))
                .collect()
        })
        .collect()
}
