//! Neighborhood graphs over support-set members and their connected components.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityField;
use crate::error::{CacError, Result};
use crate::points::{squared_distance, PointSet};

/// Graph on a subset of points; `(i, j)` is an edge iff `|x_i - x_j|_2 < eta / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub vertices: Vec<usize>,
    /// Pairs of point indices with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    /// Point indices, ascending.
    pub members: Vec<usize>,
}

/// Pair scan over `members`. Vertices are stored sorted and deduplicated.
pub fn build_eta_graph(points: &PointSet, members: &[usize], eta: f64) -> Result<NeighborGraph> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(CacError::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let mut vertices = members.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    if let Some(&last) = vertices.last() {
        if last >= points.len() {
            return Err(CacError::InvalidInput(format!(
                "vertex {last} out of range for {} points",
                points.len()
            )));
        }
    }
    let reach = 0.5 * eta;
    let reach_sq = reach * reach;
    let edges: Vec<(usize, usize)> = (0..vertices.len())
        .into_par_iter()
        .flat_map_iter(|a| {
            let i = vertices[a];
            let xi = points.row(i);
            vertices[a + 1..]
                .iter()
                .filter(move |&&j| {
                    let d2 = squared_distance(xi, points.row(j));
                    // the predicate is on the Euclidean distance; d2 only prefilters
                    d2 <= reach_sq * (1.0 + 1e-12) && d2.sqrt() < reach
                })
                .map(move |&j| (i, j))
        })
        .collect();
    Ok(NeighborGraph {
        vertices,
        edges,
        eta,
    })
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Maximal connected vertex sets, ordered (and numbered) by smallest member.
pub fn connected_components(graph: &NeighborGraph) -> Vec<Component> {
    let n = graph.vertices.len();
    let slot = |v: usize| {
        graph
            .vertices
            .binary_search(&v)
            .expect("edge endpoint is a vertex")
    };
    let mut ds = DisjointSet::new(n);
    for &(i, j) in &graph.edges {
        ds.union(slot(i), slot(j));
    }
    let mut root_to_component: Vec<Option<usize>> = vec![None; n];
    let mut components: Vec<Component> = Vec::new();
    // vertices are ascending, so first sight of a root is its smallest member
    for (s, &v) in graph.vertices.iter().enumerate() {
        let root = ds.find(s);
        match root_to_component[root] {
            Some(c) => components[c].members.push(v),
            None => {
                root_to_component[root] = Some(components.len());
                components.push(Component {
                    id: components.len(),
                    members: vec![v],
                });
            }
        }
    }
    components
}

/// Member with the largest density value; lowest index on ties.
pub fn component_mode(component: &Component, field: &DensityField) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &i in &component.members {
        let v = *field
            .values
            .get(i)
            .ok_or_else(|| CacError::InvalidInput(format!("member {i} outside the density field")))?;
        match best {
            Some(b) if field.values[b] > v || (field.values[b] == v && b < i) => {}
            _ => best = Some(i),
        }
    }
    best.ok_or_else(|| CacError::InvalidInput("empty component has no mode".into()))
}
