use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EdgeId, Mesh, VertexId};
use crate::error::{Error, Result};

/// A simple path: consecutive edges, no repeated vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    /// Edge ids in travel order. Ordering of paths compares this first.
    pub edges: Vec<EdgeId>,
    /// Vertex sequence, one longer than `edges`.
    pub vertices: Vec<VertexId>,
}

impl Path {
    pub fn hop_len(&self) -> usize {
        self.edges.len()
    }

    pub fn start(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn end(&self) -> VertexId {
        *self.vertices.last().expect("path has vertices")
    }

    pub fn interior_vertices(&self) -> &[VertexId] {
        &self.vertices[1..self.vertices.len() - 1]
    }
}

/// Hop distance from `source` to every vertex over edges accepted by `allowed`
/// (`usize::MAX` when unreachable).
pub fn hop_distances(mesh: &Mesh, source: VertexId, allowed: &dyn Fn(EdgeId) -> bool) -> Vec<usize> {
    let mut dist = vec![usize::MAX; mesh.num_vertices()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        for &e in mesh.vertex_edges(v) {
            if !allowed(e) {
                continue;
            }
            let w = mesh.other_end(e, v);
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Vertices within `radius` hops of `vertex` (sorted, always contains `vertex`).
pub fn coverage_neighborhood(mesh: &Mesh, vertex: VertexId, radius: usize) -> Vec<VertexId> {
    let mut dist = BTreeMap::from([(vertex, 0usize)]);
    let mut queue = VecDeque::from([vertex]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        for w in mesh.neighbors(v) {
            if !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    dist.into_keys().collect()
}

/// All simple paths from `a` to `b` with hop count at most the shortest hop
/// count plus `tol`, sorted by edge sequence.
pub fn enumerate_near_shortest_paths(mesh: &Mesh, a: VertexId, b: VertexId, tol: usize) -> Result<Vec<Path>> {
    enumerate_near_shortest_paths_filtered(mesh, a, b, tol, &|_| true)
}

/// As [`enumerate_near_shortest_paths`], restricted to edges accepted by `allowed`.
pub fn enumerate_near_shortest_paths_filtered(
    mesh: &Mesh,
    a: VertexId,
    b: VertexId,
    tol: usize,
    allowed: &dyn Fn(EdgeId) -> bool,
) -> Result<Vec<Path>> {
    let n = mesh.num_vertices();
    if a >= n || b >= n {
        return Err(Error::InvalidQuery(format!("path endpoints {a}, {b} out of range")));
    }
    if a == b {
        return Err(Error::InvalidQuery(format!("path endpoints coincide ({a})")));
    }
    let to_b = hop_distances(mesh, b, allowed);
    if to_b[a] == usize::MAX {
        return Err(Error::InvalidQuery(format!("vertices {a} and {b} are not connected")));
    }
    let bound = to_b[a] + tol;

    struct Search<'a> {
        mesh: &'a Mesh,
        b: VertexId,
        bound: usize,
        to_b: Vec<usize>,
        allowed: &'a dyn Fn(EdgeId) -> bool,
        on_path: Vec<bool>,
        edges: Vec<EdgeId>,
        vertices: Vec<VertexId>,
        out: Vec<Path>,
    }

    impl Search<'_> {
        fn walk(&mut self, v: VertexId) {
            for &e in self.mesh.vertex_edges(v) {
                if !(self.allowed)(e) {
                    continue;
                }
                let w = self.mesh.other_end(e, v);
                if self.on_path[w] || self.to_b[w] == usize::MAX {
                    continue;
                }
                if self.edges.len() + 1 + self.to_b[w] > self.bound {
                    continue;
                }
                self.edges.push(e);
                self.vertices.push(w);
                if w == self.b {
                    self.out.push(Path {
                        edges: self.edges.clone(),
                        vertices: self.vertices.clone(),
                    });
                } else {
                    self.on_path[w] = true;
                    self.walk(w);
                    self.on_path[w] = false;
                }
                self.edges.pop();
                self.vertices.pop();
            }
        }
    }

    let mut search = Search {
        mesh,
        b,
        bound,
        to_b,
        allowed,
        on_path: vec![false; n],
        edges: Vec::new(),
        vertices: vec![a],
        out: Vec::new(),
    };
    search.on_path[a] = true;
    search.walk(a);
    let mut out = search.out;
    out.sort();
    out.dedup();
    Ok(out)
}

/// One vertex per partition label, preferring vertices that touch no other
/// sub-mesh. Deterministic for a fixed seed.
pub fn sample_partition_vertices(mesh: &Mesh, seed: u64) -> Result<BTreeMap<usize, VertexId>> {
    let labels = mesh
        .partition()
        .ok_or_else(|| Error::InvalidQuery("mesh has no partition".into()))?;
    let count = mesh.num_partition_labels();
    let mut vertex_labels: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.num_vertices()];
    for (f, &l) in labels.iter().enumerate() {
        for &v in mesh.face(f) {
            vertex_labels[v].insert(l);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for l in 0..count {
        let all: Vec<VertexId> = (0..mesh.num_vertices())
            .filter(|&v| vertex_labels[v].contains(&l))
            .collect();
        let interior: Vec<VertexId> = all.iter().copied().filter(|&v| vertex_labels[v].len() == 1).collect();
        let pool = if interior.is_empty() { &all } else { &interior };
        let pick = pool[rng.random_range(0..pool.len())];
        out.insert(l, pick);
    }
    Ok(out)
}
