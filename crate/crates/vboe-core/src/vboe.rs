//! The composed estimation protocol: randomly interleaved test and
//! computation rounds, threshold acceptance, and the ideal resources used as
//! the reference in real-vs-ideal experiments.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::adversary::RoundServers;
use crate::coloring::{greedy_coloring, Coloring};
use crate::dmbqc::DmbqcError;
use crate::graph::MeasurementPattern;
use crate::seed::derive_rng;
use crate::traps::{build_test_round, run_test_round};
use crate::ubqc::{run_ubqc_round, UbqcError};

/// Public protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolParams {
    pub n_c: usize,
    pub n_t: usize,
    /// Allowed failed-test fraction, in `[0, 1)`.
    pub w: f64,
    /// Allowed estimate bias.
    pub epsilon: f64,
    /// Color count of the trap partition.
    pub k: usize,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ParamViolation {
    RoundCountsTooSmall,
    WOutOfRange,
    EpsilonNotPositive,
    ColorCountZero,
    SlackNotPositive,
    KwNotBelowEpsilon,
    SlackSumNotBelowEpsilon,
}

/// Checks every hypothesis the security statement needs; empty means valid.
// Negated comparisons are deliberate throughout: a NaN parameter must fail
// validation, and `x <= 0.0` would let it through.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_params(p: &ProtocolParams) -> Vec<ParamViolation> {
    let mut v = Vec::new();
    if p.n_c < 1 || p.n_t < 1 {
        v.push(ParamViolation::RoundCountsTooSmall);
    }
    if !(0.0..1.0).contains(&p.w) {
        v.push(ParamViolation::WOutOfRange);
    }
    if !(p.epsilon > 0.0) {
        v.push(ParamViolation::EpsilonNotPositive);
    }
    if p.k == 0 {
        v.push(ParamViolation::ColorCountZero);
    }
    if !(p.gamma1 > 0.0) || !(p.gamma2 > 0.0) {
        v.push(ParamViolation::SlackNotPositive);
    }
    if !(p.k as f64 * p.w < p.epsilon) {
        v.push(ParamViolation::KwNotBelowEpsilon);
    }
    if !(p.gamma1 + p.k as f64 * p.w + p.gamma2 < p.epsilon) {
        v.push(ParamViolation::SlackSumNotBelowEpsilon);
    }
    v
}

#[derive(Debug, Error, PartialEq)]
pub enum VboeError {
    #[error("invalid parameters: {0:?}")]
    InvalidParams(Vec<ParamViolation>),
    #[error("pattern must have exactly one output vertex, found {0}")]
    NotBinaryObservable(usize),
    #[error("round failure: {0}")]
    Round(#[from] UbqcError),
    #[error("oracle failure: {0}")]
    Oracle(#[from] DmbqcError),
}

/// Role of each round position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScheduledKind {
    Computation,
    Test,
}

/// Random placement of tests among the `N_c + N_t` rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundSchedule {
    pub kinds: Vec<ScheduledKind>,
}

impl RoundSchedule {
    pub fn test_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == ScheduledKind::Test)
            .map(|(i, _)| i)
    }

    pub fn computation_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == ScheduledKind::Computation)
            .map(|(i, _)| i)
    }
}

/// Uniform over all `C(n_c + n_t, n_t)` test placements (Fisher-Yates).
pub fn sample_schedule(n_c: usize, n_t: usize, rng: &mut dyn RngCore) -> RoundSchedule {
    assert!(n_c >= 1 && n_t >= 1);
    let n = n_c + n_t;
    let mut kinds = Vec::with_capacity(n);
    kinds.extend(core::iter::repeat_n(ScheduledKind::Test, n_t));
    kinds.extend(core::iter::repeat_n(ScheduledKind::Computation, n_c));
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        kinds.swap(i, j);
    }
    RoundSchedule { kinds }
}

/// Per-round outcome in the verdict log.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RoundResult {
    Computation { output: u8 },
    Test { passed: bool },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Outcome {
    Accept { estimate: f64 },
    Abort,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Verdict {
    pub outcome: Outcome,
    pub failed_tests: usize,
    pub round_log: Vec<RoundResult>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self.outcome, Outcome::Accept { .. })
    }

    pub fn estimate(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Accept { estimate } => Some(estimate),
            Outcome::Abort => None,
        }
    }
}

/// Runs the full protocol. Round randomness is derived per round from
/// `master_seed`, so results do not depend on execution order.
pub fn run_vboe(
    pattern: &MeasurementPattern,
    params: &ProtocolParams,
    coloring: &Coloring,
    servers: &mut dyn RoundServers,
    master_seed: u64,
) -> Result<Verdict, VboeError> {
    let violations = validate_params(params);
    if !violations.is_empty() {
        return Err(VboeError::InvalidParams(violations));
    }
    if pattern.outputs.len() != 1 {
        return Err(VboeError::NotBinaryObservable(pattern.outputs.len()));
    }
    let mut schedule_rng = derive_rng(master_seed, &[u64::MAX]);
    let schedule = sample_schedule(params.n_c, params.n_t, &mut schedule_rng);

    let mut round_log = Vec::with_capacity(schedule.kinds.len());
    let mut failed_tests = 0usize;
    let mut ones = 0usize;
    for (i, kind) in schedule.kinds.iter().enumerate() {
        let mut rng = derive_rng(master_seed, &[i as u64]);
        let mut server = servers.begin_round(i);
        match kind {
            ScheduledKind::Test => {
                let plan = build_test_round(&pattern.graph, coloring, &mut rng);
                let (passed, _) = run_test_round(&plan, &pattern.graph, &mut *server, &mut rng)?;
                failed_tests += usize::from(!passed);
                round_log.push(RoundResult::Test { passed });
            }
            ScheduledKind::Computation => {
                let (_, out) = run_ubqc_round(pattern, &mut *server, &mut rng)?;
                ones += usize::from(out[0]);
                round_log.push(RoundResult::Computation { output: out[0] });
            }
        }
    }
    // Strict rule: accept iff failed < w * N_t.
    let outcome = if (failed_tests as f64) < params.w * params.n_t as f64 {
        Outcome::Accept {
            estimate: ones as f64 / params.n_c as f64,
        }
    } else {
        Outcome::Abort
    };
    Ok(Verdict {
        outcome,
        failed_tests,
        round_log,
    })
}

/// Convenience: the coloring the protocol uses if none is supplied.
pub fn default_coloring(pattern: &MeasurementPattern) -> Coloring {
    greedy_coloring(&pattern.graph)
}

/// Ideal estimation resource. With no deviation (`e = 0`) it samples the
/// Bernoulli directly; with a deviating server program it emulates the
/// concrete protocol and clamps: any accepted estimate farther than `epsilon`
/// from the true value becomes an abort.
pub fn sdoe_ideal(
    pattern: &MeasurementPattern,
    params: &ProtocolParams,
    coloring: &Coloring,
    deviation: Option<&mut dyn RoundServers>,
    master_seed: u64,
) -> Result<Verdict, VboeError> {
    let violations = validate_params(params);
    if !violations.is_empty() {
        return Err(VboeError::InvalidParams(violations));
    }
    if pattern.outputs.len() != 1 {
        return Err(VboeError::NotBinaryObservable(pattern.outputs.len()));
    }
    let p = crate::dmbqc::output_one_probability(pattern, None)?;
    match deviation {
        None => {
            let mut rng = derive_rng(master_seed, &[0]);
            let mut ones = 0usize;
            let mut round_log = Vec::with_capacity(params.n_c);
            for _ in 0..params.n_c {
                let y = u8::from(rng.random::<f64>() < p);
                ones += usize::from(y);
                round_log.push(RoundResult::Computation { output: y });
            }
            Ok(Verdict {
                outcome: Outcome::Accept {
                    estimate: ones as f64 / params.n_c as f64,
                },
                failed_tests: 0,
                round_log,
            })
        }
        Some(servers) => {
            let mut v = run_vboe(pattern, params, coloring, servers, master_seed)?;
            if let Outcome::Accept { estimate } = v.outcome {
                if (estimate - p).abs() >= params.epsilon {
                    v.outcome = Outcome::Abort;
                }
            }
            Ok(v)
        }
    }
}

/// Ideal verified-computation resource: `d = 0` returns a correct sample,
/// `d = 1` rejects.
pub fn sdqc_ideal(
    pattern: &MeasurementPattern,
    d_flag: u8,
    rng: &mut dyn RngCore,
) -> Result<Option<Vec<u8>>, DmbqcError> {
    if d_flag & 1 == 1 {
        return Ok(None);
    }
    Ok(Some(crate::dmbqc::run_dmbqc(pattern, None, rng)?.output_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{
        AttackedRounds, CompiledAdversary, DeviationSpec, Honest, RoundAction,
    };
    use crate::angle::AngleIndex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params_small() -> ProtocolParams {
        ProtocolParams {
            n_c: 20,
            n_t: 20,
            w: 0.05,
            epsilon: 0.2,
            k: 2,
            gamma1: 0.05,
            gamma2: 0.04,
        }
    }

    fn pattern3() -> MeasurementPattern {
        MeasurementPattern::path(3, &[AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)])
    }

    #[test]
    fn parameter_validation_cases() {
        let ok = ProtocolParams {
            n_c: 10,
            n_t: 10,
            w: 0.01,
            epsilon: 0.1,
            k: 2,
            gamma1: 0.04,
            gamma2: 0.03,
        };
        assert!(validate_params(&ok).is_empty());
        let mut kw_eq = ok;
        kw_eq.w = 0.05; // kw = 0.1 = epsilon, not strictly less
        assert!(validate_params(&kw_eq).contains(&ParamViolation::KwNotBelowEpsilon));
        let mut slack = ok;
        slack.gamma1 = 0.09; // 0.09 + 0.02 + 0.03 >= 0.1
        assert!(validate_params(&slack).contains(&ParamViolation::SlackSumNotBelowEpsilon));
        let mut zero = ok;
        zero.n_t = 0;
        assert!(validate_params(&zero).contains(&ParamViolation::RoundCountsTooSmall));
    }

    #[test]
    fn schedule_counts_and_uniformity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // N_c = N_t = 2: all six placements roughly equally likely.
        let mut counts: alloc::collections::BTreeMap<Vec<usize>, u32> = Default::default();
        let trials = 12_000;
        for _ in 0..trials {
            let s = sample_schedule(2, 2, &mut rng);
            assert_eq!(s.test_indices().count(), 2);
            assert_eq!(s.computation_indices().count(), 2);
            *counts.entry(s.test_indices().collect()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (_, c) in counts {
            let f = f64::from(c) / f64::from(trials);
            assert!((f - 1.0 / 6.0).abs() < 5.0 * 0.5 / f64::from(trials).sqrt());
        }
    }

    #[test]
    fn honest_runs_never_abort() {
        let pat = pattern3();
        let params = params_small();
        let col = default_coloring(&pat);
        for seed in 0..30u64 {
            let v = run_vboe(&pat, &params, &col, &mut Honest, seed).unwrap();
            assert!(v.accepted(), "seed {seed}");
            assert_eq!(v.failed_tests, 0);
            // Accept implies failed < w * N_t and an integral estimate.
            let e = v.estimate().unwrap();
            assert!((0.0..=1.0).contains(&e));
            let scaled = e * params.n_c as f64;
            assert!((scaled - libm::round(scaled)).abs() < 1e-9);
        }
    }

    #[test]
    fn estimate_concentrates_near_oracle() {
        let pat = pattern3();
        let p = crate::dmbqc::output_one_probability(&pat, None).unwrap();
        let mut params = params_small();
        params.n_c = 200;
        let col = default_coloring(&pat);
        let v = run_vboe(&pat, &params, &col, &mut Honest, 99).unwrap();
        let e = v.estimate().unwrap();
        assert!((e - p).abs() < 5.0 * 0.5 / (params.n_c as f64).sqrt(), "{e} vs {p}");
    }

    #[test]
    fn flip_answers_everywhere_aborts() {
        let pat = pattern3();
        let mut params = params_small();
        params.n_t = 50;
        let col = default_coloring(&pat);
        let spec = DeviationSpec {
            attacked_rounds: AttackedRounds::Count(params.n_c + params.n_t),
            action: RoundAction::FlipAnswers,
        };
        for seed in 0..10u64 {
            let mut setup = ChaCha8Rng::seed_from_u64(seed);
            let mut adv = CompiledAdversary::new(&spec, params.n_c + params.n_t, &mut setup);
            let v = run_vboe(&pat, &params, &col, &mut adv, seed).unwrap();
            assert!(!v.accepted(), "seed {seed}");
            assert_eq!(v.failed_tests, params.n_t);
        }
    }

    #[test]
    fn verdict_is_deterministic_in_master_seed() {
        let pat = pattern3();
        let params = params_small();
        let col = default_coloring(&pat);
        let a = run_vboe(&pat, &params, &col, &mut Honest, 1234).unwrap();
        let b = run_vboe(&pat, &params, &col, &mut Honest, 1234).unwrap();
        assert_eq!(a, b);
        let c = run_vboe(&pat, &params, &col, &mut Honest, 1235).unwrap();
        assert_ne!(a.round_log, c.round_log);
    }

    #[test]
    fn invalid_params_and_multi_output_rejected() {
        let pat = pattern3();
        let col = default_coloring(&pat);
        let mut bad = params_small();
        bad.epsilon = 0.0;
        assert!(matches!(
            run_vboe(&pat, &bad, &col, &mut Honest, 0),
            Err(VboeError::InvalidParams(_))
        ));
    }

    #[test]
    fn sdoe_honest_path_matches_bernoulli_oracle() {
        let pat = pattern3();
        let p = crate::dmbqc::output_one_probability(&pat, None).unwrap();
        let mut params = params_small();
        params.n_c = 400;
        let col = default_coloring(&pat);
        let v = sdoe_ideal(&pat, &params, &col, None, 7).unwrap();
        let e = v.estimate().unwrap();
        assert!((e - p).abs() < 5.0 * 0.5 / (params.n_c as f64).sqrt());
    }

    #[test]
    fn sdoe_clamps_deviated_estimates() {
        // A flip-everything adversary that also never fails tests cannot
        // exist; emulate clamping with an adversary attacking only
        // computation-heavy schedules: here just verify the clamp rule on the
        // accepted case by using an honest server (estimate within epsilon,
        // no clamp) and by checking Abort propagates.
        let pat = pattern3();
        let params = params_small();
        let col = default_coloring(&pat);
        let mut honest = Honest;
        let v = sdoe_ideal(&pat, &params, &col, Some(&mut honest), 11).unwrap();
        assert!(v.accepted());
        let spec = DeviationSpec {
            attacked_rounds: AttackedRounds::Count(params.n_c + params.n_t),
            action: RoundAction::FlipAnswers,
        };
        let mut setup = ChaCha8Rng::seed_from_u64(1);
        let mut adv = CompiledAdversary::new(&spec, params.n_c + params.n_t, &mut setup);
        let v = sdoe_ideal(&pat, &params, &col, Some(&mut adv), 11).unwrap();
        assert!(!v.accepted());
    }

    #[test]
    fn sdqc_ideal_paths() {
        let pat = MeasurementPattern::path(3, &[AngleIndex::new(0); 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sdqc_ideal(&pat, 1, &mut rng).unwrap(), None);
        // d = 0 on the trivial pattern: deterministic correct output 0.
        for _ in 0..20 {
            assert_eq!(
                sdqc_ideal(&pat, 0, &mut rng).unwrap(),
                Some(alloc::vec![0])
            );
        }
    }
}
