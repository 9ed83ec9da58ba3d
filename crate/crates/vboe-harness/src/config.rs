//! Experiment configuration: JSON files with strict (unknown-key-rejecting)
//! schemas, converted into core types after validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vboe_core::adversary::{AttackedRounds, DeviationSpec, RoundAction};
use vboe_core::qstate::Pauli;
use vboe_core::traps::PauliTiming;
use vboe_core::vboe::{validate_params, ProtocolParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("trials must be >= 1")]
    NoTrials,
    #[error("invalid protocol parameters: {0:?}")]
    InvalidParams(Vec<vboe_core::vboe::ParamViolation>),
    #[error("experiment {0:?} requires a pattern file")]
    MissingPattern(ExperimentKind),
    #[error("experiment {0:?} requires protocol parameters")]
    MissingParams(ExperimentKind),
    #[error("referenced pattern file does not exist: {0}")]
    PatternFileMissing(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HonestAcceptance,
    AttackDetection,
    SecurityFrequency,
    BlindnessAudit,
    RealVsIdeal,
    BoundTables,
}

/// Mirror of the core parameter struct with a strict schema.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub n_c: usize,
    pub n_t: usize,
    pub w: f64,
    pub epsilon: f64,
    pub k: usize,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl From<ParamsConfig> for ProtocolParams {
    fn from(p: ParamsConfig) -> Self {
        ProtocolParams {
            n_c: p.n_c,
            n_t: p.n_t,
            w: p.w,
            epsilon: p.epsilon,
            k: p.k,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauliName {
    X,
    Y,
    Z,
}

impl From<PauliName> for Pauli {
    fn from(p: PauliName) -> Self {
        match p {
            PauliName::X => Pauli::X,
            PauliName::Y => Pauli::Y,
            PauliName::Z => Pauli::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingName {
    AtReceipt,
    BeforeMeasure,
}

impl From<TimingName> for PauliTiming {
    fn from(t: TimingName) -> Self {
        match t {
            TimingName::AtReceipt => PauliTiming::AtReceipt,
            TimingName::BeforeMeasure => PauliTiming::BeforeMeasure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackedConfig {
    Count(usize),
    Rounds(Vec<usize>),
}

impl From<&AttackedConfig> for AttackedRounds {
    fn from(a: &AttackedConfig) -> Self {
        match a {
            AttackedConfig::Count(m) => AttackedRounds::Count(*m),
            AttackedConfig::Rounds(r) => AttackedRounds::Explicit(r.iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    Honest,
    Pauli {
        paulis: BTreeMap<u32, PauliName>,
        timing: TimingName,
        attacked: AttackedConfig,
    },
    FlipAnswers {
        attacked: AttackedConfig,
    },
    RandomAnswers {
        attacked: AttackedConfig,
    },
}

impl AdversaryConfig {
    /// The corresponding deviation spec; `None` for the honest strategy.
    pub fn deviation(&self) -> Option<DeviationSpec> {
        match self {
            AdversaryConfig::Honest => None,
            AdversaryConfig::Pauli {
                paulis,
                timing,
                attacked,
            } => Some(DeviationSpec {
                attacked_rounds: attacked.into(),
                action: RoundAction::Pauli {
                    map: paulis.iter().map(|(&v, &p)| (v, p.into())).collect(),
                    timing: (*timing).into(),
                },
            }),
            AdversaryConfig::FlipAnswers { attacked } => Some(DeviationSpec {
                attacked_rounds: attacked.into(),
                action: RoundAction::FlipAnswers,
            }),
            AdversaryConfig::RandomAnswers { attacked } => Some(DeviationSpec {
                attacked_rounds: attacked.into(),
                action: RoundAction::RandomAnswers,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryConfig>,
    pub trials: u64,
    pub master_seed: u64,
    /// Acceptance threshold for the real-vs-ideal distinguishing estimate.
    #[serde(default = "default_tvd_threshold")]
    pub tvd_threshold: f64,
}

fn default_tvd_threshold() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials < 1 {
            return Err(ConfigError::NoTrials);
        }
        let needs_pattern = matches!(
            self.experiment,
            ExperimentKind::HonestAcceptance
                | ExperimentKind::AttackDetection
                | ExperimentKind::SecurityFrequency
                | ExperimentKind::RealVsIdeal
        );
        if needs_pattern {
            match &self.pattern {
                None => return Err(ConfigError::MissingPattern(self.experiment)),
                Some(p) if !p.exists() => {
                    return Err(ConfigError::PatternFileMissing(p.clone()))
                }
                Some(_) => {}
            }
        }
        let needs_params = matches!(
            self.experiment,
            ExperimentKind::HonestAcceptance
                | ExperimentKind::SecurityFrequency
                | ExperimentKind::RealVsIdeal
                | ExperimentKind::BoundTables
        );
        if needs_params {
            match self.params {
                None => return Err(ConfigError::MissingParams(self.experiment)),
                Some(p) => {
                    let violations = validate_params(&p.into());
                    if !violations.is_empty() {
                        return Err(ConfigError::InvalidParams(violations));
                    }
                }
            }
        }
        Ok(())
    }
}
