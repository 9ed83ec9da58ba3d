//! Experiment drivers. Every trial draws its randomness from a seed derived
//! from (master seed, trial index), so reports are identical no matter how
//! the parallel pool schedules the work.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use vboe_core::adversary::{CompiledAdversary, Honest, RoundServer, RoundServers, RoundAction};
use vboe_core::blindness::{
    answer_strings, average_sent_density, delta_marginal_deviation, enumerate_patterns,
    server_view, view_distance_at,
};
use vboe_core::bounds::{hoeffding_mean_bound, security_failure_bound};
use vboe_core::coloring::greedy_coloring;
use vboe_core::dmbqc::output_one_probability;
use vboe_core::qstate::{DensityMatrix, Pauli};
use vboe_core::seed::{derive_rng, derive_seed};
use vboe_core::traps::{
    build_test_round, exact_failure_probability, exact_failure_probability_times_k,
    run_test_round, PauliTiming,
};
use vboe_core::vboe::{run_vboe, sdoe_ideal, Outcome, ProtocolParams};
use vboe_core::{AngleIndex, MeasurementPattern, VertexId};

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::pattern::{load_pattern, PatternFileError};
use crate::report::{Assertion, ExperimentReport, SeedSource};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("pattern: {0}")]
    Pattern(#[from] PatternFileError),
    #[error("trial {trial}: {message}")]
    Trial { trial: u64, message: String },
}

fn trial_err<E: std::fmt::Display>(trial: u64) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError::Trial {
        trial,
        message: e.to_string(),
    }
}

/// Dispatches on the experiment kind and assembles the report.
pub fn run_experiment(
    config: &ExperimentConfig,
    master_seed: u64,
    seed_source: SeedSource,
) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let (results, aggregates, bounds, assertions) = match config.experiment {
        ExperimentKind::HonestAcceptance => honest_acceptance(config, master_seed)?,
        ExperimentKind::AttackDetection => attack_detection(config, master_seed)?,
        ExperimentKind::SecurityFrequency => security_frequency(config, master_seed)?,
        ExperimentKind::BlindnessAudit => blindness_audit()?,
        ExperimentKind::RealVsIdeal => real_vs_ideal(config, master_seed)?,
        ExperimentKind::BoundTables => bound_tables(config)?,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        master_seed,
        seed_source,
        results,
        aggregates,
        bounds,
        assertions,
    })
}

type Parts = (
    serde_json::Value,
    BTreeMap<String, f64>,
    BTreeMap<String, f64>,
    Vec<Assertion>,
);

fn params_of(config: &ExperimentConfig) -> ProtocolParams {
    config.params.expect("validated").into()
}

#[derive(Debug, Clone, Serialize)]
struct TrialVerdict {
    accepted: bool,
    failed_tests: usize,
    estimate: Option<f64>,
}

fn honest_acceptance(config: &ExperimentConfig, seed: u64) -> Result<Parts, ExperimentError> {
    let pattern = load_pattern(config.pattern.as_ref().expect("validated"))?;
    let params = params_of(config);
    let coloring = greedy_coloring(&pattern.graph);
    let verdicts: Vec<TrialVerdict> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let v = run_vboe(
                &pattern,
                &params,
                &coloring,
                &mut Honest,
                derive_seed(seed, &[t]),
            )
            .map_err(trial_err(t))?;
            Ok(TrialVerdict {
                accepted: v.accepted(),
                failed_tests: v.failed_tests,
                estimate: v.estimate(),
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let aborts = verdicts.iter().filter(|v| !v.accepted).count();
    let mean_estimate = verdicts
        .iter()
        .filter_map(|v| v.estimate)
        .sum::<f64>()
        / verdicts.iter().filter(|v| v.accepted).count().max(1) as f64;
    let aggregates = BTreeMap::from([
        ("trials".to_string(), config.trials as f64),
        ("aborts".to_string(), aborts as f64),
        ("mean_estimate".to_string(), mean_estimate),
    ]);
    let assertions = vec![Assertion::check(
        "honest_runs_never_abort",
        aborts == 0,
        format!("{aborts} aborts in {} trials", config.trials),
    )];
    Ok((json!({ "verdicts": verdicts }), aggregates, BTreeMap::new(), assertions))
}

#[derive(Debug, Clone, Serialize)]
struct DetectionRow {
    vertex: VertexId,
    pauli: String,
    exact_failure: f64,
    exact_failure_times_k: f64,
    empirical_failure: f64,
}

fn attack_detection(config: &ExperimentConfig, seed: u64) -> Result<Parts, ExperimentError> {
    let pattern = load_pattern(config.pattern.as_ref().expect("validated"))?;
    let coloring = greedy_coloring(&pattern.graph);
    let k = coloring.num_colors();
    let deviations: Vec<(VertexId, Pauli)> = pattern
        .graph
        .vertices()
        .iter()
        .flat_map(|&v| Pauli::nontrivial().into_iter().map(move |p| (v, p)))
        .collect();
    let rows: Vec<DetectionRow> = deviations
        .par_iter()
        .enumerate()
        .map(|(i, &(v, p))| {
            let attack = Some((v, p, PauliTiming::AtReceipt));
            let exact = exact_failure_probability(&pattern.graph, &coloring, attack);
            let times_k = exact_failure_probability_times_k(&pattern.graph, &coloring, attack);
            let mut failures = 0u64;
            for t in 0..config.trials {
                let mut rng = derive_rng(seed, &[i as u64, t]);
                let plan = build_test_round(&pattern.graph, &coloring, &mut rng);
                let mut server = RoundServer::attacking(RoundAction::Pauli {
                    map: BTreeMap::from([(v, p)]),
                    timing: PauliTiming::AtReceipt,
                });
                let (pass, _) = run_test_round(&plan, &pattern.graph, &mut server, &mut rng)
                    .map_err(trial_err(t))?;
                failures += u64::from(!pass);
            }
            Ok(DetectionRow {
                vertex: v,
                pauli: format!("{p:?}"),
                exact_failure: exact,
                exact_failure_times_k: times_k,
                empirical_failure: failures as f64 / config.trials as f64,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let min_times_k = rows
        .iter()
        .map(|r| r.exact_failure_times_k)
        .fold(f64::INFINITY, f64::min);
    let honest = exact_failure_probability(&pattern.graph, &coloring, None);
    let mut assertions = vec![
        Assertion::check(
            "honest_test_rounds_never_fail",
            honest == 0.0,
            format!("honest exact failure {honest}"),
        ),
        Assertion::check(
            "detection_floor_one_over_k",
            min_times_k >= 1.0,
            format!("min K*Pr[fail] = {min_times_k} over {} deviations", rows.len()),
        ),
    ];
    // Sampled frequencies agree with the exact enumeration (5 sigma).
    let n = config.trials as f64;
    let sampling_ok = rows.iter().all(|r| {
        let se = (r.exact_failure * (1.0 - r.exact_failure) / n).sqrt();
        (r.empirical_failure - r.exact_failure).abs() <= 5.0 * se + 1e-12
    });
    assertions.push(Assertion::check(
        "sampling_matches_exact",
        sampling_ok,
        format!("{} deviations at {} trials each", rows.len(), config.trials),
    ));
    let aggregates = BTreeMap::from([
        ("deviations".to_string(), rows.len() as f64),
        ("colors".to_string(), k as f64),
        ("min_exact_failure_times_k".to_string(), min_times_k),
    ]);
    let bounds = BTreeMap::from([("detection_floor".to_string(), 1.0 / k as f64)]);
    Ok((json!({ "deviations": rows }), aggregates, bounds, assertions))
}

fn compiled(config: &ExperimentConfig, n_rounds: usize, seed: u64, trial: u64) -> Box<dyn RoundServers> {
    match config.adversary.as_ref().and_then(|a| a.deviation()) {
        None => Box::new(Honest),
        Some(spec) => {
            let mut setup = derive_rng(seed, &[trial, 0]);
            Box::new(CompiledAdversary::new(&spec, n_rounds, &mut setup))
        }
    }
}

fn security_frequency(config: &ExperimentConfig, seed: u64) -> Result<Parts, ExperimentError> {
    let pattern = load_pattern(config.pattern.as_ref().expect("validated"))?;
    let params = params_of(config);
    let coloring = greedy_coloring(&pattern.graph);
    let p = output_one_probability(&pattern, None).map_err(trial_err(0))?;
    let n_rounds = params.n_c + params.n_t;
    let outcomes: Vec<(bool, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut adv = compiled(config, n_rounds, seed, t);
            let v = run_vboe(
                &pattern,
                &params,
                &coloring,
                adv.as_mut(),
                derive_seed(seed, &[t, 1]),
            )
            .map_err(trial_err(t))?;
            let accepted = v.accepted();
            let bad = match v.estimate() {
                Some(e) => (e - p).abs() >= params.epsilon,
                None => false,
            };
            Ok((accepted, bad))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let accepts = outcomes.iter().filter(|(a, _)| *a).count();
    let bad_accepts = outcomes.iter().filter(|(a, b)| *a && *b).count();
    let n = config.trials as f64;
    let freq = bad_accepts as f64 / n;
    let report = security_failure_bound(&params).map_err(trial_err(0))?;
    let se = (freq * (1.0 - freq) / n).sqrt();
    let aggregates = BTreeMap::from([
        ("trials".to_string(), n),
        ("accept_rate".to_string(), accepts as f64 / n),
        ("bad_accept_frequency".to_string(), freq),
        ("bad_accept_standard_error".to_string(), se),
        ("true_probability".to_string(), p),
    ]);
    let bounds = BTreeMap::from([
        ("gamma1_term".to_string(), report.gamma1_term),
        ("bound_z_term".to_string(), report.bound_z_term),
        ("bound_y_term_test".to_string(), report.bound_y_term_test),
        ("bound_y_term_binom".to_string(), report.bound_y_term_binom),
        ("security_failure_total".to_string(), report.total),
    ]);
    let assertions = vec![Assertion::check(
        "bad_accept_within_bound",
        freq <= report.total + 3.0 * se,
        format!("freq {freq} vs bound {} + 3se {}", report.total, 3.0 * se),
    )];
    Ok((
        json!({ "accepts": accepts, "bad_accepts": bad_accepts }),
        aggregates,
        bounds,
        assertions,
    ))
}

/// Second angle assignment used by the audit: distinct from all-zero on every
/// measured vertex.
fn audit_angles(pattern: &MeasurementPattern) -> MeasurementPattern {
    let mut alt = pattern.clone();
    for (i, &v) in pattern.graph.vertices().iter().enumerate() {
        alt.angles.insert(v, AngleIndex::new((2 * i as i64 + 1) % 8));
    }
    alt
}

fn blindness_audit() -> Result<Parts, ExperimentError> {
    let patterns = enumerate_patterns(3);
    let per_pattern: Vec<(f64, f64)> = patterns
        .par_iter()
        .map(|pat| {
            let alt = audit_angles(pat);
            let mut max_dist: f64 = 0.0;
            let mut max_marginal: f64 = 0.0;
            let zero = vec![0u8; pat.graph.vertices().len()];
            for answers in answer_strings(pat) {
                let va = server_view(pat, &answers);
                let vb = server_view(&alt, &answers);
                max_dist = max_dist.max(view_distance_at(&va, &vb, &zero));
                max_marginal = max_marginal.max(delta_marginal_deviation(&va));
            }
            (max_dist, max_marginal)
        })
        .collect();
    let max_view_distance = per_pattern.iter().map(|x| x.0).fold(0.0, f64::max);
    let max_marginal_dev = per_pattern.iter().map(|x| x.1).fold(0.0, f64::max);
    let max_mixed_dev = (1..=3usize)
        .map(|n| {
            average_sent_density(n).max_abs_diff(&DensityMatrix::maximally_mixed(n))
        })
        .fold(0.0, f64::max);
    let aggregates = BTreeMap::from([
        ("patterns".to_string(), patterns.len() as f64),
        ("max_view_distance".to_string(), max_view_distance),
        ("max_delta_marginal_deviation".to_string(), max_marginal_dev),
        ("max_mixed_state_deviation".to_string(), max_mixed_dev),
    ]);
    let assertions = vec![
        Assertion::check(
            "views_identical_across_angles",
            max_view_distance < 1e-9,
            format!("max entrywise gap {max_view_distance:e}"),
        ),
        Assertion::check(
            "delta_marginals_uniform",
            max_marginal_dev < 1e-9,
            format!("max marginal deviation {max_marginal_dev:e}"),
        ),
        Assertion::check(
            "average_states_maximally_mixed",
            max_mixed_dev < 1e-9,
            format!("max entrywise gap {max_mixed_dev:e}"),
        ),
    ];
    Ok((
        json!({ "patterns_audited": patterns.len() }),
        aggregates,
        BTreeMap::new(),
        assertions,
    ))
}

fn real_vs_ideal(config: &ExperimentConfig, seed: u64) -> Result<Parts, ExperimentError> {
    let pattern = load_pattern(config.pattern.as_ref().expect("validated"))?;
    let params = params_of(config);
    let coloring = greedy_coloring(&pattern.graph);
    let n_rounds = params.n_c + params.n_t;
    let honest = config
        .adversary
        .as_ref()
        .is_none_or(|a| a.deviation().is_none());
    // Outcome encoding: -1 for abort, else the accepted ones-count.
    let encode = |o: &Outcome| match o {
        Outcome::Abort => -1i64,
        Outcome::Accept { estimate } => (estimate * params.n_c as f64).round() as i64,
    };
    let pairs: Vec<(i64, i64)> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let run_seed = derive_seed(seed, &[t, 2]);
            let mut adv = compiled(config, n_rounds, seed, t);
            let real = run_vboe(&pattern, &params, &coloring, adv.as_mut(), run_seed)
                .map_err(trial_err(t))?;
            let ideal = if honest {
                sdoe_ideal(&pattern, &params, &coloring, None, run_seed)
            } else {
                let mut adv = compiled(config, n_rounds, seed, t);
                sdoe_ideal(&pattern, &params, &coloring, Some(adv.as_mut()), run_seed)
            }
            .map_err(trial_err(t))?;
            Ok((encode(&real.outcome), encode(&ideal.outcome)))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let real: Vec<i64> = pairs.iter().map(|p| p.0).collect();
    let ideal: Vec<i64> = pairs.iter().map(|p| p.1).collect();
    let tvd = vboe_core::bounds::tvd_estimate(&real, &ideal).map_err(trial_err(0))?;
    let aggregates = BTreeMap::from([
        ("trials".to_string(), config.trials as f64),
        ("tvd_estimate".to_string(), tvd),
        (
            "real_abort_rate".to_string(),
            real.iter().filter(|&&x| x < 0).count() as f64 / config.trials as f64,
        ),
        (
            "ideal_abort_rate".to_string(),
            ideal.iter().filter(|&&x| x < 0).count() as f64 / config.trials as f64,
        ),
    ]);
    let bounds = BTreeMap::from([("tvd_threshold".to_string(), config.tvd_threshold)]);
    let assertions = vec![Assertion::check(
        "real_matches_ideal",
        tvd <= config.tvd_threshold,
        format!("tvd {tvd} vs threshold {}", config.tvd_threshold),
    )];
    Ok((json!({}), aggregates, bounds, assertions))
}

#[derive(Debug, Clone, Serialize)]
struct BoundRow {
    scale: usize,
    n_c: usize,
    n_t: usize,
    gamma1_term: f64,
    bound_z_term: f64,
    bound_y_term_test: f64,
    bound_y_term_binom: f64,
    total: f64,
    hoeffding: f64,
}

fn bound_tables(config: &ExperimentConfig) -> Result<Parts, ExperimentError> {
    let base = params_of(config);
    let rows: Vec<BoundRow> = [1usize, 2, 4, 8, 16]
        .iter()
        .map(|&scale| {
            let mut p = base;
            p.n_c *= scale;
            p.n_t *= scale;
            let r = security_failure_bound(&p).map_err(trial_err(0))?;
            Ok(BoundRow {
                scale,
                n_c: p.n_c,
                n_t: p.n_t,
                gamma1_term: r.gamma1_term,
                bound_z_term: r.bound_z_term,
                bound_y_term_test: r.bound_y_term_test,
                bound_y_term_binom: r.bound_y_term_binom,
                total: r.total,
                hoeffding: hoeffding_mean_bound(p.epsilon, p.n_c).map_err(trial_err(0))?,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let monotone = rows.windows(2).all(|w| w[1].total <= w[0].total)
        && rows.windows(2).all(|w| w[1].hoeffding <= w[0].hoeffding);
    let aggregates = BTreeMap::from([
        ("rows".to_string(), rows.len() as f64),
        ("smallest_total".to_string(), rows.last().unwrap().total),
    ]);
    let assertions = vec![Assertion::check(
        "bounds_monotone_in_rounds",
        monotone,
        "totals and Hoeffding bounds weakly decrease along the scale sweep".to_string(),
    )];
    Ok((json!({ "table": rows }), aggregates, BTreeMap::new(), assertions))
}
