//! Graphs, flows, and measurement patterns.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use thiserror::Error;

use crate::angle::AngleIndex;

/// Vertices are identified by non-negative integers.
pub type VertexId = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("edge ({0}, {1}) references a vertex that is not in the graph")]
    DanglingEdge(VertexId, VertexId),
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(VertexId),
}

/// Undirected simple graph over integer vertex ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertices: Vec<VertexId>,
    edges: Vec<(VertexId, VertexId)>,
    neighbors: BTreeMap<VertexId, BTreeSet<VertexId>>,
}

impl Graph {
    pub fn new(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> Result<Self, GraphError> {
        let vertex_set: BTreeSet<VertexId> = vertices.into_iter().collect();
        let mut neighbors: BTreeMap<VertexId, BTreeSet<VertexId>> =
            vertex_set.iter().map(|&v| (v, BTreeSet::new())).collect();
        let mut normalized = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !vertex_set.contains(&a) || !vertex_set.contains(&b) {
                return Err(GraphError::DanglingEdge(a, b));
            }
            normalized.insert((a.min(b), a.max(b)));
        }
        for &(a, b) in &normalized {
            neighbors.get_mut(&a).unwrap().insert(b);
            neighbors.get_mut(&b).unwrap().insert(a);
        }
        Ok(Graph {
            vertices: vertex_set.into_iter().collect(),
            edges: normalized.into_iter().collect(),
            neighbors,
        })
    }

    /// A path `0 - 1 - ... - (n-1)`.
    pub fn path(n: u32) -> Self {
        Graph::new(0..n, (1..n).map(|v| (v - 1, v))).unwrap()
    }

    /// Vertices in ascending order.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Edges in lexicographic order with each pair `(min, max)`.
    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.neighbors.contains_key(&v)
    }

    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.neighbors.get(&v).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.neighbors.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.neighbors.get(&v).map_or(0, |n| n.len())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.vertices.first() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = alloc::vec![start];
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.len() == self.vertices.len()
    }
}

/// Correction function plus a total measurement order extending the flow's
/// partial order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    /// `f`: measured vertex -> correction vertex.
    pub map: BTreeMap<VertexId, VertexId>,
    /// Total measurement order over all vertices.
    pub order: Vec<VertexId>,
}

impl Flow {
    pub fn new(
        map: impl IntoIterator<Item = (VertexId, VertexId)>,
        order: impl IntoIterator<Item = VertexId>,
    ) -> Self {
        Flow {
            map: map.into_iter().collect(),
            order: order.into_iter().collect(),
        }
    }

    /// Position of each vertex in the total order.
    pub fn positions(&self) -> BTreeMap<VertexId, usize> {
        self.order.iter().enumerate().map(|(i, &v)| (v, i)).collect()
    }
}

/// One violated flow condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowViolation {
    /// The order is not a permutation of the vertex set.
    OrderNotPermutation,
    /// `f` is not a function from non-outputs into non-inputs.
    BadDomainOrRange { vertex: VertexId },
    /// Condition 1: `(v, f(v))` must be an edge.
    NotAnEdge { vertex: VertexId },
    /// Condition 2: `v` must be measured before `f(v)`.
    CorrectionBeforeVertex { vertex: VertexId },
    /// Condition 3: every other neighbor of `f(v)` must come after `v`.
    NeighborBeforeVertex { vertex: VertexId, neighbor: VertexId },
}

/// Validity report for a flow; empty `violations` means the flow is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowReport {
    pub violations: Vec<FlowViolation>,
}

impl FlowReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the three flow conditions for `(graph, inputs, outputs, flow)`.
pub fn validate_flow(
    graph: &Graph,
    inputs: &BTreeSet<VertexId>,
    outputs: &BTreeSet<VertexId>,
    flow: &Flow,
) -> FlowReport {
    let mut violations = Vec::new();
    let vertex_set: BTreeSet<VertexId> = graph.vertices().iter().copied().collect();
    let order_set: BTreeSet<VertexId> = flow.order.iter().copied().collect();
    if order_set != vertex_set || flow.order.len() != vertex_set.len() {
        violations.push(FlowViolation::OrderNotPermutation);
        return FlowReport { violations };
    }
    let pos = flow.positions();
    for &v in graph.vertices() {
        let measured = !outputs.contains(&v);
        match (measured, flow.map.get(&v)) {
            (true, Some(&fv)) => {
                if inputs.contains(&fv) || !graph.contains(fv) {
                    violations.push(FlowViolation::BadDomainOrRange { vertex: v });
                    continue;
                }
                // Condition 1.
                if !graph.has_edge(v, fv) {
                    violations.push(FlowViolation::NotAnEdge { vertex: v });
                }
                // Condition 2.
                if pos[&v] >= pos[&fv] {
                    violations.push(FlowViolation::CorrectionBeforeVertex { vertex: v });
                }
                // Condition 3.
                for w in graph.neighbors(fv) {
                    if w != v && pos[&v] >= pos[&w] {
                        violations.push(FlowViolation::NeighborBeforeVertex {
                            vertex: v,
                            neighbor: w,
                        });
                    }
                }
            }
            (true, None) | (false, Some(_)) => {
                violations.push(FlowViolation::BadDomainOrRange { vertex: v });
            }
            (false, None) => {}
        }
    }
    FlowReport { violations }
}

/// X and Z dependency sets for one target vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencySets {
    pub s_x: BTreeSet<VertexId>,
    pub s_z: BTreeSet<VertexId>,
}

/// MBQC pattern: graph, input/output sets, per-vertex angles, and a flow.
///
/// Angles are stored for every vertex, including outputs: classical-output
/// patterns measure output qubits too (default output angle 0, the X basis).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPattern {
    pub graph: Graph,
    pub inputs: BTreeSet<VertexId>,
    pub outputs: BTreeSet<VertexId>,
    pub angles: BTreeMap<VertexId, AngleIndex>,
    pub flow: Flow,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("inputs or outputs reference vertices outside the graph")]
    BadInputOutput,
    #[error("vertex {0} has no measurement angle")]
    MissingAngle(VertexId),
    #[error("angle given for unknown vertex {0}")]
    AngleForUnknownVertex(VertexId),
    #[error("invalid flow: {0:?}")]
    InvalidFlow(Vec<FlowViolation>),
}

impl MeasurementPattern {
    /// Builds and validates a pattern. Missing output angles default to 0.
    pub fn new(
        graph: Graph,
        inputs: impl IntoIterator<Item = VertexId>,
        outputs: impl IntoIterator<Item = VertexId>,
        angles: impl IntoIterator<Item = (VertexId, AngleIndex)>,
        flow: Flow,
    ) -> Result<Self, PatternError> {
        let inputs: BTreeSet<VertexId> = inputs.into_iter().collect();
        let outputs: BTreeSet<VertexId> = outputs.into_iter().collect();
        if inputs.iter().chain(&outputs).any(|&v| !graph.contains(v)) {
            return Err(PatternError::BadInputOutput);
        }
        let mut angles: BTreeMap<VertexId, AngleIndex> = angles.into_iter().collect();
        if let Some(&v) = angles.keys().find(|v| !graph.contains(**v)) {
            return Err(PatternError::AngleForUnknownVertex(v));
        }
        for &v in graph.vertices() {
            if let alloc::collections::btree_map::Entry::Vacant(e) = angles.entry(v) {
                if outputs.contains(&v) {
                    e.insert(AngleIndex::new(0));
                } else {
                    return Err(PatternError::MissingAngle(v));
                }
            }
        }
        let report = validate_flow(&graph, &inputs, &outputs, &flow);
        if !report.is_valid() {
            return Err(PatternError::InvalidFlow(report.violations));
        }
        Ok(MeasurementPattern {
            graph,
            inputs,
            outputs,
            angles,
            flow,
        })
    }

    /// Canonical pattern on the path `0 - 1 - ... - (n-1)` with the shift flow,
    /// input `{0}`, output `{n-1}`.
    pub fn path(n: u32, angles: &[AngleIndex]) -> Self {
        assert_eq!(angles.len() as u32, n);
        let graph = Graph::path(n);
        let flow = Flow::new((0..n - 1).map(|v| (v, v + 1)), 0..n);
        MeasurementPattern::new(
            graph,
            [0],
            [n - 1],
            (0..n).map(|v| (v, angles[v as usize])),
            flow,
        )
        .unwrap()
    }

    /// Outputs in ascending vertex order; fixes the bit order of results.
    pub fn sorted_outputs(&self) -> Vec<VertexId> {
        self.outputs.iter().copied().collect()
    }

    /// X/Z dependency sets of vertex `v`: `S_X = f^{-1}(v)`,
    /// `S_Z = {j != v : v in N(f(j))}` (a vertex never depends on its own
    /// outcome).
    pub fn dependency_sets(&self, v: VertexId) -> Result<DependencySets, GraphError> {
        if !self.graph.contains(v) {
            return Err(GraphError::UnknownVertex(v));
        }
        let s_x = self
            .flow
            .map
            .iter()
            .filter(|&(_, &fv)| fv == v)
            .map(|(&j, _)| j)
            .collect();
        let s_z = self
            .flow
            .map
            .iter()
            .filter(|&(&j, &fj)| j != v && self.graph.has_edge(fj, v))
            .map(|(&j, _)| j)
            .collect();
        Ok(DependencySets { s_x, s_z })
    }
}

/// Adaptive angle update: `(-1)^{s_x} * phi + s_z * pi`, exact over the
/// discrete angle set.
pub fn update_angle(phi: AngleIndex, s_x: u8, s_z: u8) -> AngleIndex {
    phi.negate_if(s_x).add_pi_if(s_z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> (Graph, BTreeSet<VertexId>, BTreeSet<VertexId>) {
        (Graph::path(3), BTreeSet::from([0]), BTreeSet::from([2]))
    }

    #[test]
    fn canonical_path_flow_is_valid() {
        let (g, i, o) = p3();
        let flow = Flow::new([(0, 1), (1, 2)], [0, 1, 2]);
        assert!(validate_flow(&g, &i, &o, &flow).is_valid());
    }

    #[test]
    fn non_edge_correction_violates_condition_one() {
        let (g, i, o) = p3();
        let flow = Flow::new([(0, 2), (1, 2)], [0, 1, 2]);
        let report = validate_flow(&g, &i, &o, &flow);
        assert!(report
            .violations
            .contains(&FlowViolation::NotAnEdge { vertex: 0 }));
    }

    #[test]
    fn wrong_order_violates_condition_two() {
        let (g, i, o) = p3();
        let flow = Flow::new([(0, 1), (1, 2)], [1, 0, 2]);
        let report = validate_flow(&g, &i, &o, &flow);
        assert!(report
            .violations
            .contains(&FlowViolation::CorrectionBeforeVertex { vertex: 0 }));
    }

    #[test]
    fn shift_flow_valid_on_all_short_paths() {
        for n in 2..=8u32 {
            let g = Graph::path(n);
            let i = BTreeSet::from([0]);
            let o = BTreeSet::from([n - 1]);
            let flow = Flow::new((0..n - 1).map(|v| (v, v + 1)), 0..n);
            assert!(validate_flow(&g, &i, &o, &flow).is_valid(), "P_{n}");
        }
    }

    #[test]
    fn dependency_sets_on_path() {
        let pat = MeasurementPattern::path(3, &[AngleIndex::new(0); 3]);
        let d2 = pat.dependency_sets(1).unwrap();
        assert_eq!(d2.s_x, BTreeSet::from([0]));
        assert_eq!(d2.s_z, BTreeSet::new());
        let d1 = pat.dependency_sets(0).unwrap();
        assert!(d1.s_x.is_empty() && d1.s_z.is_empty());
        assert_eq!(
            pat.dependency_sets(9),
            Err(GraphError::UnknownVertex(9))
        );
    }

    #[test]
    fn dependency_sets_on_longer_path() {
        // Brute-force check of S_Z over all j with v in N(f(j)).
        let pat = MeasurementPattern::path(4, &[AngleIndex::new(0); 4]);
        for &v in pat.graph.vertices() {
            let sets = pat.dependency_sets(v).unwrap();
            let expected: BTreeSet<VertexId> = pat
                .flow
                .map
                .iter()
                .filter(|&(&j, &fj)| j != v && pat.graph.neighbors(fj).any(|w| w == v))
                .map(|(&j, _)| j)
                .collect();
            assert_eq!(sets.s_z, expected, "vertex {v}");
        }
        // S_Z(2) = {1}? f(1)=2, N(2)={1,3}, 2 not in N(2); but f(0)=1, N(1)={0,2} contains 2.
        assert_eq!(
            pat.dependency_sets(2).unwrap().s_z,
            BTreeSet::from([0])
        );
    }

    #[test]
    fn update_angle_cases() {
        assert_eq!(update_angle(AngleIndex::new(2), 0, 0), AngleIndex::new(2));
        assert_eq!(update_angle(AngleIndex::new(1), 1, 0), AngleIndex::new(7));
        assert_eq!(update_angle(AngleIndex::new(2), 1, 1), AngleIndex::new(2));
    }

    #[test]
    fn double_negation_identity() {
        for phi in AngleIndex::all() {
            assert_eq!(phi.negate_if(1).negate_if(1), phi);
        }
    }

    #[test]
    fn graph_rejects_self_loops_and_dangling_edges() {
        assert_eq!(
            Graph::new([0, 1], [(0, 0)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            Graph::new([0, 1], [(0, 2)]),
            Err(GraphError::DanglingEdge(0, 2))
        );
    }

    #[test]
    fn pattern_requires_angles_for_measured_vertices() {
        let g = Graph::path(2);
        let flow = Flow::new([(0, 1)], [0, 1]);
        let err = MeasurementPattern::new(g, [0], [1], [(0, AngleIndex::new(0))], flow.clone());
        // Output angle defaults to 0; missing non-output angle is an error.
        assert!(err.is_ok());
        let g = Graph::path(2);
        let err = MeasurementPattern::new(g, [0], [1], [], flow);
        assert_eq!(err, Err(PatternError::MissingAngle(0)));
    }
}
