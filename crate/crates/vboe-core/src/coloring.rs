//! Proper vertex colorings used to build trap-set partitions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::graph::{Graph, VertexId};

/// A proper coloring: classes are disjoint independent sets covering the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    /// `classes[c]` lists the vertices of color `c`, ascending.
    pub classes: Vec<Vec<VertexId>>,
}

impl Coloring {
    pub fn num_colors(&self) -> usize {
        self.classes.len()
    }

    pub fn color_of(&self, v: VertexId) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&v))
    }

    /// Checks that this is a proper coloring of `graph`.
    pub fn is_proper(&self, graph: &Graph) -> bool {
        let mut seen: BTreeMap<VertexId, usize> = BTreeMap::new();
        for (c, class) in self.classes.iter().enumerate() {
            for &v in class {
                if !graph.contains(v) || seen.insert(v, c).is_some() {
                    return false;
                }
            }
        }
        if seen.len() != graph.num_vertices() {
            return false;
        }
        graph
            .edges()
            .iter()
            .all(|&(a, b)| seen[&a] != seen[&b])
    }
}

/// Greedy coloring: vertices in descending degree, ties broken by ascending
/// id; each vertex takes the smallest color unused by its neighbors.
pub fn greedy_coloring(graph: &Graph) -> Coloring {
    let mut order: Vec<VertexId> = graph.vertices().to_vec();
    order.sort_by_key(|&v| (core::cmp::Reverse(graph.degree(v)), v));
    let mut color: BTreeMap<VertexId, usize> = BTreeMap::new();
    let mut classes: Vec<Vec<VertexId>> = Vec::new();
    for v in order {
        let used: Vec<usize> = graph
            .neighbors(v)
            .filter_map(|w| color.get(&w).copied())
            .collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(v);
        color.insert(v, c);
    }
    for class in &mut classes {
        class.sort_unstable();
    }
    Coloring { classes }
}
