//! Transcript recording and replay. A transcript file is JSONL: a header
//! line carrying the pattern, then one line per recorded round. Replay
//! re-runs every client-side check (angle recomputation, trap equations,
//! decoding) against the recorded messages.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vboe_core::graph::update_angle;
use vboe_core::seed::derive_rng;
use vboe_core::traps::{build_test_round, expected_trap_bit, run_test_round, TestRoundPlan};
use vboe_core::ubqc::{blind_angle, run_ubqc_round, HonestServer, RoundTranscript};
use vboe_core::coloring::greedy_coloring;
use vboe_core::{AngleIndex, MeasurementPattern, PI};

use crate::pattern::PatternFile;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("transcript file has no header line")]
    MissingHeader,
    #[error("bad pattern in header: {0}")]
    BadPattern(#[from] crate::pattern::PatternFileError),
    #[error("round failure during recording: {0}")]
    Round(#[from] vboe_core::ubqc::UbqcError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub pattern: PatternFile,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedRound {
    pub index: usize,
    pub transcript: RoundTranscript,
    /// Test-round plan when this was a test round.
    pub plan: Option<TestRoundPlan>,
    /// Decoded output bits when this was a computation round.
    pub decoded: Option<Vec<u8>>,
}

/// Records `n_comp` honest computation rounds and `n_test` honest test rounds.
pub fn record_transcripts(
    pattern: &MeasurementPattern,
    master_seed: u64,
    n_comp: usize,
    n_test: usize,
) -> Result<Vec<RecordedRound>, ReplayError> {
    let coloring = greedy_coloring(&pattern.graph);
    let mut rounds = Vec::new();
    for i in 0..n_comp + n_test {
        let mut rng = derive_rng(master_seed, &[0x7265636f, i as u64]);
        if i < n_comp {
            let (transcript, decoded) = run_ubqc_round(pattern, &mut HonestServer, &mut rng)?;
            rounds.push(RecordedRound {
                index: i,
                transcript,
                plan: None,
                decoded: Some(decoded),
            });
        } else {
            let plan = build_test_round(&pattern.graph, &coloring, &mut rng);
            let (_, transcript) =
                run_test_round(&plan, &pattern.graph, &mut HonestServer, &mut rng)?;
            rounds.push(RecordedRound {
                index: i,
                transcript,
                plan: Some(plan),
                decoded: None,
            });
        }
    }
    Ok(rounds)
}

pub fn write_transcripts(
    path: &Path,
    pattern: &MeasurementPattern,
    master_seed: u64,
    rounds: &[RecordedRound],
) -> Result<(), ReplayError> {
    let mut f = std::fs::File::create(path)?;
    let header = TranscriptHeader {
        pattern: PatternFile::from_pattern(pattern),
        master_seed,
    };
    writeln!(f, "{}", serde_json::to_string(&header)?)?;
    for r in rounds {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// One detected inconsistency between a recorded round and the client rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub round: usize,
    pub what: String,
}

/// Client-side checks for a recorded computation round: every δ must equal
/// the blinded adapted angle recomputed from the secrets and answers, and the
/// recorded decode must equal `b XOR r` on the outputs.
fn check_computation(
    pattern: &MeasurementPattern,
    rec: &RecordedRound,
    out: &mut Vec<Mismatch>,
) {
    let t = &rec.transcript;
    for &(v, delta) in &t.deltas {
        let (s_x, s_z) = if pattern.inputs.contains(&v) {
            (0, 0)
        } else {
            match pattern.dependency_sets(v) {
                Ok(deps) => {
                    let strip = |set: &std::collections::BTreeSet<u32>| {
                        set.iter()
                            .map(|j| t.bits.get(j).copied().unwrap_or(0) ^ t.secrets.r[j])
                            .fold(0, |a, b| a ^ b)
                    };
                    (strip(&deps.s_x), strip(&deps.s_z))
                }
                Err(_) => {
                    out.push(Mismatch {
                        round: rec.index,
                        what: format!("vertex {v} not in pattern"),
                    });
                    continue;
                }
            }
        };
        let phi_prime = update_angle(pattern.angles[&v], s_x, s_z);
        let expected = blind_angle(phi_prime, &t.secrets, v);
        if expected != delta {
            out.push(Mismatch {
                round: rec.index,
                what: format!("delta mismatch at vertex {v}: recorded {delta:?}, recomputed {expected:?}"),
            });
        }
    }
    if let Some(decoded) = &rec.decoded {
        let expected: Vec<u8> = pattern
            .outputs
            .iter()
            .map(|v| t.bits.get(v).copied().unwrap_or(0) ^ t.secrets.r[v])
            .collect();
        if *decoded != expected {
            out.push(Mismatch {
                round: rec.index,
                what: format!("decode mismatch: recorded {decoded:?}, recomputed {expected:?}"),
            });
        }
    }
}

/// Trap-equation checks for a recorded test round: trap δ = θ + rπ, and each
/// trap answer must equal `r XOR` the neighboring dummy parity.
fn check_test(
    pattern: &MeasurementPattern,
    rec: &RecordedRound,
    plan: &TestRoundPlan,
    out: &mut Vec<Mismatch>,
) {
    let t = &rec.transcript;
    for &v in &plan.traps {
        let expected_delta = plan.theta[&v]
            + if plan.r[&v] & 1 == 1 { PI } else { AngleIndex::new(0) };
        match t.deltas.iter().find(|(w, _)| *w == v) {
            Some(&(_, delta)) if delta == expected_delta => {}
            Some(&(_, delta)) => out.push(Mismatch {
                round: rec.index,
                what: format!("trap delta mismatch at vertex {v}: recorded {delta:?}, expected {expected_delta:?}"),
            }),
            None => out.push(Mismatch {
                round: rec.index,
                what: format!("no recorded delta for trap vertex {v}"),
            }),
        }
        match expected_trap_bit(plan, &pattern.graph, v) {
            Ok(expected) => {
                let got = t.bits.get(&v).copied().unwrap_or(0);
                if got != expected {
                    out.push(Mismatch {
                        round: rec.index,
                        what: format!("trap equation failed at vertex {v}: answer {got}, expected {expected}"),
                    });
                }
            }
            Err(e) => out.push(Mismatch {
                round: rec.index,
                what: format!("trap check error at vertex {v}: {e}"),
            }),
        }
    }
}

/// Verifies every recorded round; returns all mismatches (empty = clean).
pub fn verify_rounds(pattern: &MeasurementPattern, rounds: &[RecordedRound]) -> Vec<Mismatch> {
    let mut out = Vec::new();
    for rec in rounds {
        match &rec.plan {
            Some(plan) => check_test(pattern, rec, plan, &mut out),
            None => check_computation(pattern, rec, &mut out),
        }
    }
    out
}

/// Loads a transcript file and re-runs the client-side checks.
pub fn replay_transcript(path: &Path) -> Result<Vec<Mismatch>, ReplayError> {
    let f = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(f).lines();
    let header: TranscriptHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(ReplayError::MissingHeader),
    };
    let pattern = header.pattern.build()?;
    let mut rounds = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rounds.push(serde_json::from_str::<RecordedRound>(&line)?);
    }
    Ok(verify_rounds(&pattern, &rounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern3() -> MeasurementPattern {
        MeasurementPattern::path(
            3,
            &[AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)],
        )
    }

    #[test]
    fn honest_transcripts_replay_clean() {
        let pat = pattern3();
        let rounds = record_transcripts(&pat, 7, 4, 4).unwrap();
        assert_eq!(verify_rounds(&pat, &rounds), Vec::new());
    }

    #[test]
    fn flipped_trap_answer_yields_one_mismatch() {
        let pat = pattern3();
        let mut rounds = record_transcripts(&pat, 11, 0, 1).unwrap();
        let plan = rounds[0].plan.clone().unwrap();
        let trap = plan.traps[0];
        let b = rounds[0].transcript.bits[&trap];
        rounds[0].transcript.bits.insert(trap, b ^ 1);
        let mismatches = verify_rounds(&pat, &rounds);
        assert_eq!(mismatches.len(), 1);
        assert!(mismatches[0].what.contains("trap equation failed"));
    }

    #[test]
    fn altered_delta_flagged() {
        let pat = pattern3();
        let mut rounds = record_transcripts(&pat, 13, 1, 0).unwrap();
        let (v, d) = rounds[0].transcript.deltas[1];
        rounds[0].transcript.deltas[1] = (v, d + AngleIndex::new(1));
        let mismatches = verify_rounds(&pat, &rounds);
        assert!(mismatches.iter().any(|m| m.what.contains("delta mismatch")));
    }

    #[test]
    fn roundtrip_through_file() {
        let pat = pattern3();
        let rounds = record_transcripts(&pat, 17, 2, 2).unwrap();
        let dir = std::env::temp_dir().join("vboe-replay-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("transcripts.jsonl");
        write_transcripts(&path, &pat, 17, &rounds).unwrap();
        assert_eq!(replay_transcript(&path).unwrap(), Vec::new());
    }
}
