//! Simulation core for verifiable blind delegated estimation.
//!
//! Everything here is `no_std` + `alloc`: exact discrete angle arithmetic,
//! a dense statevector kernel, measurement-based computation with flows,
//! blind delegation, trap-based verification rounds, the composed estimation
//! protocol with its ideal-resource counterparts, adversary models, and the
//! concentration bounds used to size experiments.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adversary;
pub mod angle;
pub mod blindness;
pub mod bounds;
pub mod coloring;
pub mod dmbqc;
pub mod graph;
pub mod qstate;
pub mod seed;
pub mod traps;
pub mod ubqc;
pub mod vboe;

pub use angle::{AngleIndex, PI};
pub use graph::{Flow, Graph, MeasurementPattern, VertexId};
pub use qstate::{DensityMatrix, QubitKind, StateVector};
