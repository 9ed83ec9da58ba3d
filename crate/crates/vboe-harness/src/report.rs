//! Experiment reports: a deterministic JSON document plus a CSV summary.
//! Wall-clock timing deliberately never enters the report (it would break
//! byte-for-byte reproducibility); the CLI prints it to stderr instead.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One embedded pass/fail check; any failure flips the process exit code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn check(name: &str, passed: bool, detail: String) -> Self {
        Assertion {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Where the effective master seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Flag,
    Environment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub seed_source: SeedSource,
    /// Experiment-specific detail (per-trial records, sweep tables, ...).
    pub results: serde_json::Value,
    /// Flat numeric aggregates; also the rows of the CSV summary.
    pub aggregates: BTreeMap<String, f64>,
    /// Closed-form bound values quoted next to the empirical frequencies.
    pub bounds: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Deterministic serialization: maps are ordered, floats round-trip.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        for (k, v) in &self.aggregates {
            out.push_str(&format!("aggregate,{k},{v}\n"));
        }
        for (k, v) in &self.bounds {
            out.push_str(&format!("bound,{k},{v}\n"));
        }
        for a in &self.assertions {
            out.push_str(&format!(
                "assertion,{},{}\n",
                a.name,
                if a.passed { "pass" } else { "fail" }
            ));
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::fs::File::create(dir.join("report.json"))?;
        f.write_all(self.to_json().as_bytes())?;
        let mut f = std::fs::File::create(dir.join("summary.csv"))?;
        f.write_all(self.summary_csv().as_bytes())?;
        Ok(())
    }
}
