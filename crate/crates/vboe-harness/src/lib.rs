//! Experiment harness around `vboe-core`: strict JSON configs, pattern
//! files, seeded experiment drivers, deterministic reports, and transcript
//! replay.

pub mod config;
pub mod experiment;
pub mod pattern;
pub mod replay;
pub mod report;
