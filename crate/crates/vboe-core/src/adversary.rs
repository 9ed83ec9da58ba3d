//! Server-side strategies: the honest server plus parameterized deviation
//! families used by the security experiments.
//!
//! Adversaries pick which rounds to attack from round indices and public
//! parameters only — the round interface carries no computation/test marker,
//! so round-obliviousness is structural.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::angle::AngleIndex;
use crate::graph::VertexId;
use crate::qstate::Pauli;
use crate::traps::PauliTiming;
use crate::ubqc::{HonestServer, Register, Server, UbqcError};

/// What a deviating server does inside an attacked round.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RoundAction {
    /// Apply fixed Paulis to the mapped vertices at the given timing.
    Pauli {
        map: BTreeMap<VertexId, Pauli>,
        timing: PauliTiming,
    },
    /// Measure honestly but negate every reported bit.
    FlipAnswers,
    /// Ignore the measurement result and answer fair coin flips.
    RandomAnswers,
}

/// Which rounds get attacked.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AttackedRounds {
    Explicit(BTreeSet<usize>),
    /// `m` rounds sampled uniformly without replacement.
    Count(usize),
}

/// A full deviation strategy over a protocol run.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviationSpec {
    pub attacked_rounds: AttackedRounds,
    pub action: RoundAction,
}

/// Per-round server executing one [`RoundAction`] (or behaving honestly).
pub struct RoundServer {
    action: Option<RoundAction>,
}

impl RoundServer {
    pub fn honest() -> Self {
        RoundServer { action: None }
    }

    pub fn attacking(action: RoundAction) -> Self {
        RoundServer {
            action: Some(action),
        }
    }
}

impl Server for RoundServer {
    fn on_receive(&mut self, reg: &mut Register, v: VertexId) -> Result<(), UbqcError> {
        if let Some(RoundAction::Pauli { map, timing: PauliTiming::AtReceipt }) = &self.action {
            if let Some(&p) = map.get(&v) {
                reg.apply_pauli(v, p)?;
            }
        }
        Ok(())
    }

    fn measure(
        &mut self,
        reg: &mut Register,
        v: VertexId,
        delta: AngleIndex,
        rng: &mut dyn RngCore,
    ) -> Result<u8, UbqcError> {
        match &self.action {
            Some(RoundAction::Pauli { map, timing: PauliTiming::BeforeMeasure }) => {
                if let Some(&p) = map.get(&v) {
                    reg.apply_pauli(v, p)?;
                }
                reg.measure(v, delta, rng)
            }
            Some(RoundAction::FlipAnswers) => Ok(reg.measure(v, delta, rng)? ^ 1),
            Some(RoundAction::RandomAnswers) => {
                reg.measure(v, delta, rng)?;
                Ok(rng.random_range(0..2u8))
            }
            _ => reg.measure(v, delta, rng),
        }
    }
}

/// Hands out one fresh server per round; instances are never shared.
pub trait RoundServers {
    fn begin_round(&mut self, index: usize) -> Box<dyn Server>;
}

/// The all-honest strategy.
pub struct Honest;

impl RoundServers for Honest {
    fn begin_round(&mut self, _index: usize) -> Box<dyn Server> {
        Box::new(HonestServer)
    }
}

/// A [`DeviationSpec`] compiled against a fixed round count: the attacked set
/// is resolved up front so parallel rounds stay deterministic.
pub struct CompiledAdversary {
    attacked: BTreeSet<usize>,
    action: RoundAction,
}

impl CompiledAdversary {
    pub fn new(spec: &DeviationSpec, n_rounds: usize, rng: &mut dyn RngCore) -> Self {
        let attacked = match &spec.attacked_rounds {
            AttackedRounds::Explicit(s) => s.clone(),
            AttackedRounds::Count(m) => sample_without_replacement(*m, n_rounds, rng),
        };
        CompiledAdversary {
            attacked,
            action: spec.action.clone(),
        }
    }

    pub fn attacked(&self) -> &BTreeSet<usize> {
        &self.attacked
    }
}

impl RoundServers for CompiledAdversary {
    fn begin_round(&mut self, index: usize) -> Box<dyn Server> {
        if self.attacked.contains(&index) {
            Box::new(RoundServer::attacking(self.action.clone()))
        } else {
            Box::new(RoundServer::honest())
        }
    }
}

/// Uniform `m`-subset of `0..n` by partial Fisher-Yates.
pub fn sample_without_replacement(m: usize, n: usize, rng: &mut dyn RngCore) -> BTreeSet<usize> {
    assert!(m <= n, "cannot attack more rounds than exist");
    let mut pool: Vec<usize> = (0..n).collect();
    let mut chosen = BTreeSet::new();
    for i in 0..m {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
        chosen.insert(pool[i]);
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::greedy_coloring;
    use crate::graph::{Graph, MeasurementPattern};
    use crate::traps::{build_test_round, run_test_round};
    use crate::ubqc::run_ubqc_round;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_attack_equals_honest_under_fixed_seed() {
        let pat = MeasurementPattern::path(3, &[AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)]);
        let spec = DeviationSpec {
            attacked_rounds: AttackedRounds::Count(0),
            action: RoundAction::FlipAnswers,
        };
        let mut setup = ChaCha8Rng::seed_from_u64(3);
        let mut adv = CompiledAdversary::new(&spec, 10, &mut setup);
        for i in 0..10 {
            let mut a = ChaCha8Rng::seed_from_u64(1000 + i);
            let mut b = ChaCha8Rng::seed_from_u64(1000 + i);
            let (ta, oa) = run_ubqc_round(&pat, &mut *adv.begin_round(i as usize), &mut a).unwrap();
            let (tb, ob) = run_ubqc_round(&pat, &mut HonestServer, &mut b).unwrap();
            assert_eq!(ta, tb);
            assert_eq!(oa, ob);
        }
    }

    #[test]
    fn z_on_output_vertex_flips_decoded_output() {
        // Z commutes with the entangling layer, shifts the output vertex's
        // effective angle by pi, and therefore flips its X-basis outcome and
        // the decoded bit deterministically.
        let pat = MeasurementPattern::path(3, &[AngleIndex::new(0); 3]);
        // Honest decoded output is 0 w.p. 1 on the all-zero path.
        let action = RoundAction::Pauli {
            map: BTreeMap::from([(2, Pauli::Z)]),
            timing: PauliTiming::AtReceipt,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut srv = RoundServer::attacking(action.clone());
            let (_, out) = run_ubqc_round(&pat, &mut srv, &mut rng).unwrap();
            assert_eq!(out, alloc::vec![1]);
        }
    }

    #[test]
    fn flip_answers_inverts_deterministic_output() {
        // Single vertex at angle 0: honest decoded bit is 0 with certainty
        // and there are no corrections, so flipping the answer flips exactly
        // the decoded bit. (On longer paths a flipped early answer shifts a
        // later Z correction by pi and the two flips cancel.)
        let pat = MeasurementPattern::path(1, &[AngleIndex::new(0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut srv = RoundServer::attacking(RoundAction::FlipAnswers);
            let (_, out) = run_ubqc_round(&pat, &mut srv, &mut rng).unwrap();
            assert_eq!(out, alloc::vec![1]);
        }
    }

    #[test]
    fn flip_answers_fails_all_trap_rounds() {
        let g = Graph::path(3);
        let col = greedy_coloring(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let plan = build_test_round(&g, &col, &mut rng);
            let mut srv = RoundServer::attacking(RoundAction::FlipAnswers);
            let (pass, _) = run_test_round(&plan, &g, &mut srv, &mut rng).unwrap();
            assert!(!pass);
        }
    }

    #[test]
    fn count_sampling_is_uniform_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut hits = [0u32; 6];
        let trials = 12_000;
        for _ in 0..trials {
            let s = sample_without_replacement(2, 6, &mut rng);
            assert_eq!(s.len(), 2);
            for i in s {
                hits[i] += 1;
            }
        }
        // Each index appears with probability 2/6.
        for h in hits {
            let f = f64::from(h) / f64::from(trials);
            assert!((f - 2.0 / 6.0).abs() < 5.0 * 0.5 / f64::from(trials).sqrt(), "{f}");
        }
    }

    #[test]
    fn explicit_attack_set_targets_only_listed_rounds() {
        let spec = DeviationSpec {
            attacked_rounds: AttackedRounds::Explicit(BTreeSet::from([1, 4])),
            action: RoundAction::RandomAnswers,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let adv = CompiledAdversary::new(&spec, 6, &mut rng);
        assert_eq!(adv.attacked(), &BTreeSet::from([1, 4]));
    }
}
