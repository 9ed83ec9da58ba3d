//! Test rounds: trap qubits hidden among dummies, and the acceptance rule
//! that aggregates them.
//!
//! In a test round every vertex of one color class becomes a trap `|+_theta>`
//! and every other vertex a dummy `|d>`. After the edge CZs the state is a
//! product: each trap ends up in `|+_{theta + D pi}>` where `D` is the parity
//! of its neighboring dummies, so the client can predict each trap outcome
//! exactly.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::angle::AngleIndex;
use crate::coloring::Coloring;
use crate::graph::{Graph, VertexId};
use crate::qstate::{Pauli, QubitKind};
use crate::ubqc::{BlindingSecrets, Register, RoundKind, RoundTranscript, Server, UbqcError};

#[derive(Debug, Error, PartialEq)]
pub enum TrapError {
    #[error("vertex {0} is not a trap in this plan")]
    NotATrap(VertexId),
    #[error("plan does not cover the graph's vertex set")]
    PlanGraphMismatch,
}

/// Client-side description of one test round.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestRoundPlan {
    /// Index of the chosen color class.
    pub color: usize,
    /// The trap vertices (the chosen class), ascending.
    pub traps: Vec<VertexId>,
    /// Dummy bit per non-trap vertex.
    pub dummies: BTreeMap<VertexId, u8>,
    /// Blinding angle per trap.
    pub theta: BTreeMap<VertexId, AngleIndex>,
    /// Outcome pad per trap.
    pub r: BTreeMap<VertexId, u8>,
}

impl TestRoundPlan {
    pub fn is_trap(&self, v: VertexId) -> bool {
        self.traps.contains(&v)
    }
}

/// Uniform test round: class, dummy bits, trap angles and pads all uniform.
pub fn build_test_round(
    graph: &Graph,
    coloring: &Coloring,
    rng: &mut dyn RngCore,
) -> TestRoundPlan {
    let color = rng.random_range(0..coloring.num_colors());
    let traps = coloring.classes[color].clone();
    let mut dummies = BTreeMap::new();
    let mut theta = BTreeMap::new();
    let mut r = BTreeMap::new();
    for &v in graph.vertices() {
        if traps.contains(&v) {
            theta.insert(v, AngleIndex::new(rng.random_range(0..8)));
            r.insert(v, rng.random_range(0..2u8));
        } else {
            dummies.insert(v, rng.random_range(0..2u8));
        }
    }
    TestRoundPlan {
        color,
        traps,
        dummies,
        theta,
        r,
    }
}

/// Parity of the dummies neighboring trap `v`.
fn dummy_parity(plan: &TestRoundPlan, graph: &Graph, v: VertexId) -> u8 {
    graph
        .neighbors(v)
        .map(|j| plan.dummies.get(&j).copied().unwrap_or(0))
        .fold(0, |a, b| a ^ b)
}

/// Predicted outcome of trap `v`: `r XOR (parity of neighboring dummies)`.
pub fn expected_trap_bit(
    plan: &TestRoundPlan,
    graph: &Graph,
    v: VertexId,
) -> Result<u8, TrapError> {
    if !plan.is_trap(v) {
        return Err(TrapError::NotATrap(v));
    }
    Ok(plan.r[&v] ^ dummy_parity(plan, graph, v))
}

/// Runs one test round against a server; `pass` means every trap answered its
/// predicted bit.
pub fn run_test_round(
    plan: &TestRoundPlan,
    graph: &Graph,
    server: &mut dyn Server,
    rng: &mut dyn RngCore,
) -> Result<(bool, RoundTranscript), UbqcError> {
    let mut reg = Register::new();
    let mut sent = Vec::new();
    for &v in graph.vertices() {
        let kind = match plan.dummies.get(&v) {
            Some(&d) => QubitKind::Computational(d),
            None => QubitKind::PlusTheta(plan.theta[&v]),
        };
        reg.push_qubit(v, kind)?;
        sent.push((v, kind));
        server.on_receive(&mut reg, v)?;
    }
    for &(a, b) in graph.edges() {
        reg.apply_cz(a, b)?;
    }
    server.on_entangled(&mut reg)?;

    let mut bits = BTreeMap::new();
    let mut deltas = Vec::new();
    for &v in graph.vertices() {
        let delta = match plan.theta.get(&v) {
            Some(&theta) => theta.add_pi_if(plan.r[&v]),
            // Dummy angles are uniform decoys; their outcomes are ignored.
            None => AngleIndex::new(rng.random_range(0..8)),
        };
        let b = server.measure(&mut reg, v, delta, rng)?;
        deltas.push((v, delta));
        bits.insert(v, b);
    }
    let pass = plan
        .traps
        .iter()
        .all(|&v| bits[&v] == expected_trap_bit(plan, graph, v).expect("trap"));

    let theta_full = graph
        .vertices()
        .iter()
        .map(|&v| (v, plan.theta.get(&v).copied().unwrap_or(AngleIndex::new(0))))
        .collect();
    let r_full = graph
        .vertices()
        .iter()
        .map(|&v| (v, plan.r.get(&v).copied().unwrap_or(0)))
        .collect();
    let zeros: BTreeMap<VertexId, u8> = graph.vertices().iter().map(|&v| (v, 0)).collect();
    let transcript = RoundTranscript {
        sent,
        deltas,
        bits,
        secrets: BlindingSecrets {
            theta: theta_full,
            r: r_full,
            a_init: zeros.clone(),
            a_prop: zeros,
        },
        round_kind: RoundKind::Test(plan.color),
    };
    Ok((pass, transcript))
}

/// When a single-vertex Pauli deviation is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PauliTiming {
    /// On arrival, before the server entangles (the canonical deviation point:
    /// X and Y corrupt dummies and therefore neighboring traps).
    AtReceipt,
    /// Immediately before the vertex's own measurement.
    BeforeMeasure,
}

/// Exact probability that a uniformly random test round fails when the server
/// is honest except for one Pauli on one vertex.
///
/// Enumerates color class, dummy bits, trap angles, and trap pads; within each
/// configuration the trap-outcome distribution is enumerated branch by branch.
/// Every probability involved is a dyadic rational, so the f64 arithmetic is
/// exact. Dummies are left unmeasured: by no-signaling the trap-outcome
/// marginal does not depend on the dummies' decoy bases.
pub fn exact_failure_probability(
    graph: &Graph,
    coloring: &Coloring,
    attack: Option<(VertexId, Pauli, PauliTiming)>,
) -> f64 {
    let k = coloring.num_colors();
    let mut total = 0.0f64;
    for class in &coloring.classes {
        total += class_failure_probability(graph, class, attack);
    }
    total / k as f64
}

/// Like [`exact_failure_probability`] but scaled by `K`: returns
/// `sum over classes of the per-class failure probability`, an exact dyadic.
/// Comparing this against 1 tests `failure >= 1/K` without rounding.
pub fn exact_failure_probability_times_k(
    graph: &Graph,
    coloring: &Coloring,
    attack: Option<(VertexId, Pauli, PauliTiming)>,
) -> f64 {
    coloring
        .classes
        .iter()
        .map(|class| class_failure_probability(graph, class, attack))
        .sum()
}

fn class_failure_probability(
    graph: &Graph,
    traps: &[VertexId],
    attack: Option<(VertexId, Pauli, PauliTiming)>,
) -> f64 {
    let dummies: Vec<VertexId> = graph
        .vertices()
        .iter()
        .copied()
        .filter(|v| !traps.contains(v))
        .collect();
    let t = traps.len();
    let d = dummies.len();
    let mut acc = 0.0f64;
    let configs = (1u64 << d) * 8u64.pow(t as u32) * (1 << t);
    for dummy_bits in 0..(1u32 << d) {
        for theta_code in 0..8u32.pow(t as u32) {
            for r_bits in 0..(1u32 << t) {
                let plan = decode_plan(traps, &dummies, dummy_bits, theta_code, r_bits);
                acc += plan_failure_probability(graph, &plan, attack);
            }
        }
    }
    acc / configs as f64
}

fn decode_plan(
    traps: &[VertexId],
    dummies: &[VertexId],
    dummy_bits: u32,
    theta_code: u32,
    r_bits: u32,
) -> TestRoundPlan {
    let mut code = theta_code;
    let mut theta = BTreeMap::new();
    let mut r = BTreeMap::new();
    for (i, &v) in traps.iter().enumerate() {
        theta.insert(v, AngleIndex::new(i64::from(code % 8)));
        code /= 8;
        r.insert(v, ((r_bits >> i) & 1) as u8);
    }
    let dummies = dummies
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, ((dummy_bits >> i) & 1) as u8))
        .collect();
    TestRoundPlan {
        color: 0,
        traps: traps.to_vec(),
        dummies,
        theta,
        r,
    }
}

// sin^2(k pi/4) for k = 0..8: exact dyadic values.
const SIN_SQ: [f64; 8] = [0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5];

/// Failure probability of one fully specified plan under the given attack.
///
/// The post-CZ state is a product (traps `|+_{theta + D pi}>`, dummies `|d>`),
/// and a single-vertex Pauli keeps it one, so the round failure factors into
/// per-trap mismatch probabilities. Each of those is `sin^2` of a multiple of
/// `pi/4` — a dyadic rational — so this computation is exact in f64.
fn plan_failure_probability(
    graph: &Graph,
    plan: &TestRoundPlan,
    attack: Option<(VertexId, Pauli, PauliTiming)>,
) -> f64 {
    // Dummy bits as the server actually holds them: a Pauli with an X
    // component applied at receipt flips a dummy before the CZs propagate it.
    let actual_dummy = |j: VertexId| -> u8 {
        let d = plan.dummies.get(&j).copied().unwrap_or(0);
        match attack {
            Some((u, Pauli::X | Pauli::Y, PauliTiming::AtReceipt)) if u == j => d ^ 1,
            _ => d,
        }
    };
    let mut pass = 1.0f64;
    for &v in &plan.traps {
        let expected = expected_trap_bit(plan, graph, v).expect("trap");
        let d_actual = graph
            .neighbors(v)
            .filter(|j| !plan.is_trap(*j))
            .map(actual_dummy)
            .fold(0, |a, b| a ^ b);
        // Effective trap angle phi = s*theta + (D' + c) pi relative to the
        // honest theta: a Pauli on the trap itself contributes the same
        // (s, c) at either timing, because the pi-multiples are sign-blind.
        let (s_neg, c) = match attack {
            Some((u, p, _)) if u == v => match p {
                Pauli::I => (false, 0u8),
                Pauli::X => (true, 0),
                Pauli::Y => (true, 1),
                Pauli::Z => (false, 1),
            },
            _ => (false, 0),
        };
        let r_v = plan.r[&v];
        let fail_v = if !s_neg {
            // Deterministic outcome b = D' XOR r XOR c.
            f64::from(d_actual ^ r_v ^ c != expected)
        } else {
            // Outcome 1 with probability sin^2(theta) when (D'+r+c) is even,
            // cos^2(theta) otherwise.
            let p_one = if (d_actual ^ r_v ^ c) & 1 == 0 {
                SIN_SQ[plan.theta[&v].index() as usize]
            } else {
                1.0 - SIN_SQ[plan.theta[&v].index() as usize]
            };
            if expected == 1 {
                1.0 - p_one
            } else {
                p_one
            }
        };
        pass *= 1.0 - fail_v;
    }
    1.0 - pass
}

/// Aggregated verdict of an RVBQC run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RvbqcOutcome {
    Accept(Vec<u8>),
    Reject,
}

/// Threshold-plus-majority rule: reject when `failed >= w_count` test rounds
/// failed, otherwise accept the strict-majority computation output if any.
pub fn rvbqc_accept(
    test_passes: &[bool],
    w_count: usize,
    computation_outputs: &[Vec<u8>],
) -> RvbqcOutcome {
    let failed = test_passes.iter().filter(|p| !**p).count();
    if failed >= w_count {
        return RvbqcOutcome::Reject;
    }
    let mut counts: BTreeMap<&Vec<u8>, usize> = BTreeMap::new();
    for out in computation_outputs {
        *counts.entry(out).or_insert(0) += 1;
    }
    match counts.iter().max_by_key(|(_, &c)| c) {
        Some((&out, &c)) if 2 * c > computation_outputs.len() => RvbqcOutcome::Accept(out.clone()),
        _ => RvbqcOutcome::Reject,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::greedy_coloring;
    use crate::ubqc::HonestServer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expected_bit_cases() {
        let g = Graph::path(3);
        let plan = TestRoundPlan {
            color: 0,
            traps: alloc::vec![1],
            dummies: BTreeMap::from([(0, 1u8), (2, 0u8)]),
            theta: BTreeMap::from([(1, AngleIndex::new(3))]),
            r: BTreeMap::from([(1, 0u8)]),
        };
        // Neighbors carry dummies (1, 0), r = 0 -> expected 1.
        assert_eq!(expected_trap_bit(&plan, &g, 1), Ok(1));
        assert_eq!(expected_trap_bit(&plan, &g, 0), Err(TrapError::NotATrap(0)));
        let mut plan2 = plan.clone();
        plan2.dummies.insert(2, 1);
        plan2.r.insert(1, 1);
        // (1 XOR 1) XOR r=1 -> 1.
        assert_eq!(expected_trap_bit(&plan2, &g, 1), Ok(1));
    }

    #[test]
    fn honest_server_always_passes() {
        // Exhaustive over all plans for small graphs, sampled execution.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for g in [
            Graph::path(2),
            Graph::path(4),
            Graph::new([0, 1, 2], [(0, 1), (1, 2), (0, 2)]).unwrap(),
            Graph::new(0..5, [(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap(),
        ] {
            let col = greedy_coloring(&g);
            for _ in 0..300 {
                let plan = build_test_round(&g, &col, &mut rng);
                let (pass, _) = run_test_round(&plan, &g, &mut HonestServer, &mut rng).unwrap();
                assert!(pass);
            }
        }
    }

    #[test]
    fn honest_failure_probability_is_zero_exactly() {
        for g in [Graph::path(3), Graph::new([0, 1, 2], [(0, 1), (1, 2), (0, 2)]).unwrap()] {
            let col = greedy_coloring(&g);
            assert_eq!(exact_failure_probability(&g, &col, None), 0.0);
        }
    }

    #[test]
    fn z_attack_detected_at_exactly_one_over_k() {
        // Z commutes with CZ and flips a trapped vertex deterministically, so
        // detection = Pr[attacked vertex is trapped] = 1/K.
        let g = Graph::path(3);
        let col = greedy_coloring(&g);
        for v in 0..3 {
            for timing in [PauliTiming::AtReceipt, PauliTiming::BeforeMeasure] {
                let p = exact_failure_probability_times_k(&g, &col, Some((v, Pauli::Z, timing)));
                assert_eq!(p, 1.0, "vertex {v} {timing:?}");
            }
        }
    }

    #[test]
    fn x_at_receipt_meets_the_floor_but_not_before_measure() {
        let g = Graph::path(3);
        let col = greedy_coloring(&g);
        // At receipt: corrupts neighboring dummies -> at least 1/K.
        let at = exact_failure_probability_times_k(&g, &col, Some((1, Pauli::X, PauliTiming::AtReceipt)));
        assert!(at >= 1.0, "{at}");
        // Immediately before measurement, X averages to sin^2(theta) = 1/2 on
        // the trapped branch only: K * 1/(2K) = 1/2.
        let before =
            exact_failure_probability_times_k(&g, &col, Some((1, Pauli::X, PauliTiming::BeforeMeasure)));
        assert_eq!(before, 0.5);
    }

    #[test]
    fn identity_attack_never_fails() {
        let g = Graph::path(4);
        let col = greedy_coloring(&g);
        for timing in [PauliTiming::AtReceipt, PauliTiming::BeforeMeasure] {
            assert_eq!(
                exact_failure_probability(&g, &col, Some((2, Pauli::I, timing))),
                0.0
            );
        }
    }

    #[test]
    fn monte_carlo_matches_exact_for_one_attack() {
        struct ZAttack(VertexId);
        impl Server for ZAttack {
            fn on_receive(&mut self, reg: &mut Register, v: VertexId) -> Result<(), UbqcError> {
                if v == self.0 {
                    reg.apply_pauli(v, Pauli::Z)?;
                }
                Ok(())
            }
        }
        let g = Graph::path(3);
        let col = greedy_coloring(&g);
        let exact = exact_failure_probability(&g, &col, Some((0, Pauli::Z, PauliTiming::AtReceipt)));
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let trials = 20_000u32;
        let mut fails = 0u32;
        for _ in 0..trials {
            let plan = build_test_round(&g, &col, &mut rng);
            let (pass, _) = run_test_round(&plan, &g, &mut ZAttack(0), &mut rng).unwrap();
            fails += u32::from(!pass);
        }
        let freq = f64::from(fails) / f64::from(trials);
        assert!((freq - exact).abs() < 5.0 * 0.5 / f64::from(trials).sqrt(), "{freq} vs {exact}");
    }

    #[test]
    fn random_answer_trap_passes_half_the_time() {
        struct CoinServer;
        impl Server for CoinServer {
            fn measure(
                &mut self,
                reg: &mut Register,
                v: VertexId,
                delta: AngleIndex,
                rng: &mut dyn RngCore,
            ) -> Result<u8, UbqcError> {
                reg.measure(v, delta, rng)?;
                Ok(rng.random_range(0..2u8))
            }
        }
        // Single-trap plans on P_2: per-trap pass probability 1/2.
        let g = Graph::path(2);
        let col = greedy_coloring(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let trials = 20_000u32;
        let mut passes = 0u32;
        for _ in 0..trials {
            let plan = build_test_round(&g, &col, &mut rng);
            let (pass, _) = run_test_round(&plan, &g, &mut CoinServer, &mut rng).unwrap();
            passes += u32::from(pass);
        }
        let freq = f64::from(passes) / f64::from(trials);
        assert!((freq - 0.5).abs() < 5.0 * 0.5 / f64::from(trials).sqrt());
    }

    /// Independent oracle: same quantity as `plan_failure_probability` but by
    /// brute-force statevector branch enumeration (float tolerance).
    fn statevector_failure(
        graph: &Graph,
        plan: &TestRoundPlan,
        attack: Option<(VertexId, Pauli, PauliTiming)>,
    ) -> f64 {
        use crate::qstate::{prepare_qubit, StateVector, TOL};
        let order: Vec<VertexId> = graph.vertices().to_vec();
        let pos = |v: VertexId| order.iter().position(|&w| w == v).unwrap();
        let mut state: Option<StateVector> = None;
        for &v in &order {
            let kind = match plan.dummies.get(&v) {
                Some(&dv) => QubitKind::Computational(dv),
                None => QubitKind::PlusTheta(plan.theta[&v]),
            };
            let q = prepare_qubit(kind);
            state = Some(match state {
                Some(s) => s.tensor(&q),
                None => q,
            });
        }
        let mut state = state.unwrap();
        if let Some((u, p, PauliTiming::AtReceipt)) = attack {
            state = state.apply_pauli(pos(u), p).unwrap();
        }
        for &(a, b) in graph.edges() {
            state = state.apply_cz(pos(a), pos(b)).unwrap();
        }
        let mut targets: Vec<(usize, VertexId)> =
            plan.traps.iter().map(|&v| (pos(v), v)).collect();
        targets.sort_by_key(|t| core::cmp::Reverse(t.0));
        let mut fail = 0.0;
        let mut stack = alloc::vec![(1.0f64, Some(state), 0usize)];
        while let Some((w, s, step)) = stack.pop() {
            if step == targets.len() {
                continue;
            }
            let (q, v) = targets[step];
            let expected = expected_trap_bit(plan, graph, v).unwrap();
            let delta = plan.theta[&v].add_pi_if(plan.r[&v]);
            let mut s = s.unwrap();
            if let Some((u, p, PauliTiming::BeforeMeasure)) = attack {
                if u == v {
                    s = s.apply_pauli(q, p).unwrap();
                }
            }
            for (bit, (pb, rest)) in s.measurement_branches(q, delta).unwrap().into_iter().enumerate() {
                if pb < TOL * TOL {
                    continue;
                }
                if bit as u8 != expected {
                    fail += w * pb;
                } else {
                    stack.push((w * pb, rest, step + 1));
                }
            }
        }
        fail
    }

    #[test]
    fn analytic_failure_matches_statevector_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for g in [
            Graph::path(3),
            Graph::new([0, 1, 2], [(0, 1), (1, 2), (0, 2)]).unwrap(),
            Graph::new(0..4, [(0, 1), (0, 2), (0, 3)]).unwrap(),
        ] {
            let col = greedy_coloring(&g);
            for _ in 0..40 {
                let plan = build_test_round(&g, &col, &mut rng);
                let u = *g.vertices()
                    [..]
                    .get(rng.random_range(0..g.num_vertices()))
                    .unwrap();
                for p in Pauli::all() {
                    for timing in [PauliTiming::AtReceipt, PauliTiming::BeforeMeasure] {
                        let attack = Some((u, p, timing));
                        let a = plan_failure_probability(&g, &plan, attack);
                        let b = statevector_failure(&g, &plan, attack);
                        assert!((a - b).abs() < 1e-9, "{p:?} {timing:?} at {u}: {a} vs {b}");
                    }
                }
                let a = plan_failure_probability(&g, &plan, None);
                let b = statevector_failure(&g, &plan, None);
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn no_two_traps_are_adjacent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = Graph::new(0..4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let col = greedy_coloring(&g);
        for _ in 0..100 {
            let plan = build_test_round(&g, &col, &mut rng);
            for &a in &plan.traps {
                for &b in &plan.traps {
                    assert!(a == b || !g.has_edge(a, b));
                }
            }
        }
    }

    #[test]
    fn accept_rule_threshold_and_majority() {
        let one = alloc::vec![1u8];
        let zero = alloc::vec![0u8];
        // No failures, unanimous outputs.
        assert_eq!(
            rvbqc_accept(&[true, true], 1, &[one.clone(), one.clone(), one.clone()]),
            RvbqcOutcome::Accept(one.clone())
        );
        // failed == w_count: reject.
        assert_eq!(
            rvbqc_accept(&[false, true], 1, core::slice::from_ref(&one)),
            RvbqcOutcome::Reject
        );
        // 50/50 split: no strict majority.
        assert_eq!(
            rvbqc_accept(&[true], 1, &[one.clone(), zero.clone()]),
            RvbqcOutcome::Reject
        );
        // 2-vs-1 majority.
        assert_eq!(
            rvbqc_accept(&[true], 1, &[one.clone(), zero, one.clone()]),
            RvbqcOutcome::Accept(one)
        );
    }
}
