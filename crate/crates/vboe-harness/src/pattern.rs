//! Pattern files: a small JSON schema describing graph, inputs/outputs,
//! angles (as multiples of pi/4) and the flow.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vboe_core::graph::PatternError;
use vboe_core::{AngleIndex, Flow, Graph, MeasurementPattern, VertexId};

#[derive(Debug, Error)]
pub enum PatternFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad graph: {0}")]
    Graph(#[from] vboe_core::graph::GraphError),
    #[error("bad pattern: {0}")]
    Pattern(#[from] PatternError),
    #[error("angle index {1} for vertex {0} outside 0..8")]
    BadAngle(VertexId, i64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFile {
    pub map: BTreeMap<VertexId, VertexId>,
    pub order: Vec<VertexId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternFile {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<(VertexId, VertexId)>,
    pub inputs: Vec<VertexId>,
    pub outputs: Vec<VertexId>,
    /// Angle index (multiple of pi/4) per vertex; output angles may be
    /// omitted and default to 0.
    pub angles: BTreeMap<VertexId, i64>,
    pub flow: FlowFile,
}

impl PatternFile {
    pub fn build(&self) -> Result<MeasurementPattern, PatternFileError> {
        let graph = Graph::new(self.vertices.iter().copied(), self.edges.iter().copied())?;
        let mut angles = Vec::new();
        for (&v, &a) in &self.angles {
            if !(0..8).contains(&a) {
                return Err(PatternFileError::BadAngle(v, a));
            }
            angles.push((v, AngleIndex::new(a)));
        }
        let flow = Flow::new(
            self.flow.map.iter().map(|(&a, &b)| (a, b)),
            self.flow.order.iter().copied(),
        );
        Ok(MeasurementPattern::new(
            graph,
            self.inputs.iter().copied(),
            self.outputs.iter().copied(),
            angles,
            flow,
        )?)
    }

    pub fn from_pattern(pattern: &MeasurementPattern) -> Self {
        PatternFile {
            vertices: pattern.graph.vertices().to_vec(),
            edges: pattern.graph.edges().to_vec(),
            inputs: pattern.inputs.iter().copied().collect(),
            outputs: pattern.outputs.iter().copied().collect(),
            angles: pattern
                .angles
                .iter()
                .map(|(&v, a)| (v, i64::from(a.index())))
                .collect(),
            flow: FlowFile {
                map: pattern.flow.map.clone(),
                order: pattern.flow.order.clone(),
            },
        }
    }
}

pub fn load_pattern(path: &Path) -> Result<MeasurementPattern, PatternFileError> {
    let text = std::fs::read_to_string(path)?;
    let file: PatternFile = serde_json::from_str(&text)?;
    file.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_through_file_schema() {
        let pat = MeasurementPattern::path(
            3,
            &[AngleIndex::new(1), AngleIndex::new(3), AngleIndex::new(0)],
        );
        let file = PatternFile::from_pattern(&pat);
        let text = serde_json::to_string(&file).unwrap();
        let back: PatternFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap(), pat);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"vertices":[0],"edges":[],"inputs":[0],"outputs":[0],
                       "angles":{"0":0},"flow":{"map":{},"order":[0]},"extra":1}"#;
        assert!(serde_json::from_str::<PatternFile>(text).is_err());
    }

    #[test]
    fn bad_angle_rejected() {
        let text = r#"{"vertices":[0],"edges":[],"inputs":[0],"outputs":[0],
                       "angles":{"0":9},"flow":{"map":{},"order":[0]}}"#;
        let file: PatternFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.build(), Err(PatternFileError::BadAngle(0, 9))));
    }
}
