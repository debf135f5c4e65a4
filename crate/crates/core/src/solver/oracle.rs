use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, HalfEdgeId, Mesh, VertexId};
use crate::model::NetworkLayout;

/// Bare edge graph with the mesh's half-edge numbering, buildable from a mesh
/// or from a model layout.
#[derive(Debug, Clone)]
pub(crate) struct HalfEdgeGraph {
    pub endpoints: Vec<[VertexId; 2]>,
    pub lengths: Vec<f64>,
    pub vertex_edges: Vec<Vec<EdgeId>>,
}

impl HalfEdgeGraph {
    pub fn new(num_vertices: usize, endpoints: Vec<[VertexId; 2]>, lengths: Vec<f64>) -> Self {
        let mut vertex_edges = vec![Vec::new(); num_vertices];
        for (e, &[a, b]) in endpoints.iter().enumerate() {
            vertex_edges[a].push(e);
            vertex_edges[b].push(e);
        }
        HalfEdgeGraph {
            endpoints,
            lengths,
            vertex_edges,
        }
    }

    pub fn from_mesh(mesh: &Mesh) -> Self {
        Self::new(
            mesh.num_vertices(),
            mesh.edges().iter().map(|e| [e.a, e.b]).collect(),
            mesh.edges().iter().map(|e| e.length).collect(),
        )
    }

    pub fn from_layout(layout: &NetworkLayout) -> Self {
        Self::new(layout.num_vertices, layout.endpoints.clone(), layout.lengths.clone())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_edges.len()
    }

    pub fn num_edges(&self) -> usize {
        self.endpoints.len()
    }

    pub fn tail(&self, h: HalfEdgeId) -> VertexId {
        self.endpoints[h / 2][h % 2]
    }

    pub fn head(&self, h: HalfEdgeId) -> VertexId {
        self.endpoints[h / 2][1 - h % 2]
    }

    pub fn leaving(&self, v: VertexId, e: EdgeId) -> HalfEdgeId {
        if self.endpoints[e][0] == v {
            2 * e
        } else {
            2 * e + 1
        }
    }

    /// Shortest distance from every half-edge of an active edge to a half-edge
    /// whose head is a sink, moving only through non-reversing successors.
    /// Half-edges that cannot reach a sink, or are inactive, get infinity.
    pub fn distances(&self, active: &[bool], is_sink: &[bool]) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, HalfEdgeId);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }

        let nh = 2 * self.num_edges();
        let mut dist = vec![f64::INFINITY; nh];
        let mut heap = BinaryHeap::new();
        for h in 0..nh {
            if active[h / 2] && is_sink[self.head(h)] {
                dist[h] = 0.0;
                heap.push(Item(0.0, h));
            }
        }
        let mut done = vec![false; nh];
        while let Some(Item(d, s)) = heap.pop() {
            if done[s] {
                continue;
            }
            done[s] = true;
            // predecessors of s: half-edges entering tail(s) along another edge
            let j = self.tail(s);
            for &e in &self.vertex_edges[j] {
                if e == s / 2 || !active[e] {
                    continue;
                }
                let h = self.leaving(j, e) ^ 1;
                if is_sink[self.head(h)] {
                    continue;
                }
                let cand = self.lengths[e] + d;
                if cand < dist[h] {
                    dist[h] = cand;
                    heap.push(Item(cand, h));
                }
            }
        }
        dist
    }
}

/// Connected components of the active edge set that contain no sink.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidityReport {
    /// Edge ids of every island, ascending within and across islands.
    pub islands: Vec<Vec<EdgeId>>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.islands.is_empty()
    }
}

pub(crate) fn islands(graph: &HalfEdgeGraph, active: &[bool], is_sink: &[bool]) -> Vec<Vec<EdgeId>> {
    let mut seen = vec![false; graph.num_edges()];
    let mut out = Vec::new();
    for start in 0..graph.num_edges() {
        if !active[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        let mut has_sink = false;
        while let Some(e) = stack.pop() {
            comp.push(e);
            for v in graph.endpoints[e] {
                has_sink |= is_sink[v];
                for &f in &graph.vertex_edges[v] {
                    if active[f] && !seen[f] {
                        seen[f] = true;
                        stack.push(f);
                    }
                }
            }
        }
        if !has_sink {
            comp.sort_unstable();
            out.push(comp);
        }
    }
    out
}

fn masks(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> Result<(Vec<bool>, Vec<bool>)> {
    let mut a = vec![false; mesh.num_edges()];
    for &e in active {
        *a.get_mut(e)
            .ok_or_else(|| Error::InvalidQuery(format!("edge {e} does not exist")))? = true;
    }
    let mut s = vec![false; mesh.num_vertices()];
    for &v in sinks {
        *s.get_mut(v)
            .ok_or_else(|| Error::InvalidQuery(format!("vertex {v} does not exist")))? = true;
    }
    Ok((a, s))
}

/// Lists every component of `active_edges` that does not touch a sink.
pub fn check_validity(mesh: &Mesh, active_edges: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> Result<ValidityReport> {
    let (a, s) = masks(mesh, active_edges, sinks)?;
    Ok(ValidityReport {
        islands: islands(&HalfEdgeGraph::from_mesh(mesh), &a, &s),
    })
}

/// Distance values of a valid network: the chosen half-edge of every active
/// edge and `D` for every half-edge (zero unless chosen).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceValues {
    pub orientation: BTreeMap<EdgeId, HalfEdgeId>,
    pub distance: Vec<f64>,
}

impl DistanceValues {
    pub fn total(&self) -> f64 {
        self.distance.iter().sum()
    }
}

pub(crate) fn orient(graph: &HalfEdgeGraph, active: &[bool], is_sink: &[bool]) -> Option<DistanceValues> {
    let all = graph.distances(active, is_sink);
    let mut orientation = BTreeMap::new();
    let mut distance = vec![0.0; all.len()];
    for e in 0..graph.num_edges() {
        if !active[e] {
            continue;
        }
        let (d0, d1) = (all[2 * e], all[2 * e + 1]);
        if d0.is_infinite() && d1.is_infinite() {
            return None;
        }
        let h = if d0.is_infinite() || d1 < d0 - 1e-12 * (1.0 + d0) { 2 * e + 1 } else { 2 * e };
        orientation.insert(e, h);
        distance[h] = all[h];
    }
    Some(DistanceValues { orientation, distance })
}

/// Shortest travel distance toward the sinks for each active half-edge, with
/// each active edge oriented along its smaller value (ties to the lower id).
pub fn compute_distance_values(
    mesh: &Mesh,
    active_edges: &BTreeSet<EdgeId>,
    sinks: &BTreeSet<VertexId>,
) -> Result<DistanceValues> {
    let (a, s) = masks(mesh, active_edges, sinks)?;
    let graph = HalfEdgeGraph::from_mesh(mesh);
    let isl = islands(&graph, &a, &s);
    if !isl.is_empty() {
        return Err(Error::InvalidNetwork(format!("{} island(s) without a sink", isl.len())));
    }
    orient(&graph, &a, &s).ok_or_else(|| Error::InvalidNetwork("an active edge cannot reach a sink".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;
    use crate::mesh::MeshInput;

    fn chain() -> Mesh {
        Mesh::new(MeshInput {
            positions: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            wire_edges: vec![[0, 1], [1, 2]],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn chain_distances() {
        let m = chain();
        let dv = compute_distance_values(&m, &BTreeSet::from([0, 1]), &BTreeSet::from([2])).unwrap();
        assert_eq!(dv.distance[m.half_edge(1, 2).unwrap()], 0.0);
        assert_eq!(dv.distance[m.half_edge(0, 1).unwrap()], 1.0);
        assert_eq!(dv.orientation[&0], m.half_edge(0, 1).unwrap());
    }

    #[test]
    fn loop_away_from_sink_is_island() {
        let m = grid(3, 3);
        // unit square around face 4 (vertices 5, 6, 10, 9), sink at 0
        let ring: BTreeSet<EdgeId> = [[5, 6], [6, 10], [9, 10], [5, 9]]
            .iter()
            .map(|p| m.edge_between(p[0], p[1]).unwrap())
            .collect();
        let rep = check_validity(&m, &ring, &BTreeSet::from([0])).unwrap();
        assert_eq!(rep.islands.len(), 1);
        assert!(compute_distance_values(&m, &ring, &BTreeSet::from([0])).is_err());
    }

    #[test]
    fn edge_at_sink_is_valid() {
        let m = grid(1, 1);
        let rep = check_validity(&m, &BTreeSet::from([0]), &BTreeSet::from([0])).unwrap();
        assert!(rep.is_valid());
    }

    #[test]
    fn loop_through_sink_gets_finite_values() {
        let m = grid(1, 1);
        let all: BTreeSet<EdgeId> = (0..4).collect();
        let dv = compute_distance_values(&m, &all, &BTreeSet::from([0])).unwrap();
        assert_eq!(dv.orientation.len(), 4);
        // the vertex opposite the sink sits two edges away either way round
        let far: f64 = dv.distance.iter().copied().fold(0.0, f64::max);
        assert_eq!(far, 1.0);
        assert_eq!(dv.total(), 2.0);
    }
}
