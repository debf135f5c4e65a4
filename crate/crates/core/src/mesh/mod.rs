//! Polygonal mesh domain with half-edge connectivity and design annotations.
//!
//! Edges are numbered by their sorted vertex pair. Edge `e` with endpoints
//! `a < b` owns half-edges `2e` (`a -> b`) and `2e + 1` (`b -> a`), so the twin
//! of a half-edge is `h ^ 1`.

mod document;
mod paths;
mod subdivide;

pub use document::{MeshDocument, ObstacleSection, VertexEntry, MESH_DOCUMENT_VERSION};
pub use paths::{
    coverage_neighborhood, enumerate_near_shortest_paths, enumerate_near_shortest_paths_filtered,
    hop_distances, sample_partition_vertices, Path,
};
pub use subdivide::{catmull_clark_subdivide, Subdivision};

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;
pub type HalfEdgeId = usize;
pub type FaceId = usize;
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller endpoint.
    pub a: VertexId,
    /// Larger endpoint.
    pub b: VertexId,
    pub length: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotations {
    pub sinks: BTreeSet<VertexId>,
    pub obstacle_vertices: BTreeSet<VertexId>,
    pub obstacle_edges: BTreeSet<EdgeId>,
    pub obstacle_faces: BTreeSet<FaceId>,
    pub fixed_active: BTreeSet<EdgeId>,
    pub fixed_inactive: BTreeSet<EdgeId>,
    /// Sub-mesh label per face, when a partition is given.
    pub partition: Option<Vec<usize>>,
}

/// Immutable polygonal mesh. Build with [`Mesh::new`] or [`load_mesh`].
#[derive(Debug, Clone)]
pub struct Mesh {
    positions: Vec<Point>,
    edges: Vec<Edge>,
    faces: Vec<Vec<VertexId>>,
    face_edges: Vec<Vec<EdgeId>>,
    edge_faces: Vec<Vec<FaceId>>,
    vertex_edges: Vec<Vec<EdgeId>>,
    edge_index: HashMap<(VertexId, VertexId), EdgeId>,
    boundary_edge: Vec<bool>,
    boundary_vertex: Vec<bool>,
    delta_all: f64,
    annotations: Annotations,
}

/// Raw input to [`Mesh::new`]; annotation edges are given as vertex pairs.
#[derive(Debug, Clone, Default)]
pub struct MeshInput {
    pub positions: Vec<Point>,
    pub faces: Vec<Vec<VertexId>>,
    /// Edges not bounding any face.
    pub wire_edges: Vec<[VertexId; 2]>,
    pub sinks: Vec<VertexId>,
    pub obstacle_vertices: Vec<VertexId>,
    pub obstacle_edges: Vec<[VertexId; 2]>,
    pub obstacle_faces: Vec<FaceId>,
    pub partition: Vec<Vec<FaceId>>,
    pub fixed_active: Vec<[VertexId; 2]>,
    pub fixed_inactive: Vec<[VertexId; 2]>,
}

impl MeshInput {
    /// `nx` by `ny` faces of unit squares; vertex `(i, j)` has id `j * (nx + 1) + i`.
    pub fn grid(nx: usize, ny: usize) -> MeshInput {
        let mut positions = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                positions.push([i as f64, j as f64]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut faces = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                faces.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        MeshInput {
            positions,
            faces,
            ..Default::default()
        }
    }
}

fn key(u: VertexId, v: VertexId) -> (VertexId, VertexId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Mesh {
    pub fn new(input: MeshInput) -> Result<Mesh> {
        let n = input.positions.len();
        if n == 0 {
            return Err(Error::InvalidMesh("mesh has no vertices".into()));
        }
        for (i, p) in input.positions.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidMesh(format!("vertex {i} has a non-finite position")));
            }
        }
        let check_vertex = |v: VertexId, what: &str| -> Result<()> {
            if v >= n {
                Err(Error::InvalidMesh(format!("{what} references vertex {v}, but there are {n} vertices")))
            } else {
                Ok(())
            }
        };

        // Collect edges from faces and wire edges.
        let mut pairs: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        let mut directed_seen: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        for (f, face) in input.faces.iter().enumerate() {
            if face.len() < 3 {
                return Err(Error::InvalidMesh(format!("face {f} has fewer than 3 vertices")));
            }
            let distinct: BTreeSet<_> = face.iter().collect();
            if distinct.len() != face.len() {
                return Err(Error::InvalidMesh(format!("face {f} repeats a vertex")));
            }
            for k in 0..face.len() {
                let u = face[k];
                let v = face[(k + 1) % face.len()];
                check_vertex(u, "face")?;
                if !directed_seen.insert((u, v)) {
                    return Err(Error::InvalidMesh(format!(
                        "directed edge {u}->{v} is used by more than one face"
                    )));
                }
                pairs.insert(key(u, v));
            }
        }
        let mut wire_seen = BTreeSet::new();
        for &[u, v] in &input.wire_edges {
            check_vertex(u, "edge")?;
            check_vertex(v, "edge")?;
            if u == v {
                return Err(Error::InvalidMesh(format!("edge {u}-{v} is a self loop")));
            }
            if !wire_seen.insert(key(u, v)) || pairs.contains(&key(u, v)) {
                return Err(Error::InvalidMesh(format!("edge {u}-{v} is repeated")));
            }
        }
        pairs.extend(wire_seen);
        if pairs.is_empty() {
            return Err(Error::InvalidMesh("mesh has no edges".into()));
        }

        let mut edges = Vec::with_capacity(pairs.len());
        let mut edge_index = HashMap::with_capacity(pairs.len());
        for (id, &(a, b)) in pairs.iter().enumerate() {
            let pa = input.positions[a];
            let pb = input.positions[b];
            let length = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            if length <= 0.0 {
                return Err(Error::InvalidMesh(format!("edge {a}-{b} has zero length")));
            }
            edges.push(Edge { a, b, length });
            edge_index.insert((a, b), id);
        }

        let mut vertex_edges = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            vertex_edges[e.a].push(id);
            vertex_edges[e.b].push(id);
        }

        let mut edge_faces = vec![Vec::new(); edges.len()];
        let mut face_edges = Vec::with_capacity(input.faces.len());
        for (f, face) in input.faces.iter().enumerate() {
            let mut fe = Vec::with_capacity(face.len());
            for k in 0..face.len() {
                let id = edge_index[&key(face[k], face[(k + 1) % face.len()])];
                edge_faces[id].push(f);
                fe.push(id);
            }
            face_edges.push(fe);
        }
        if let Some((e, _)) = edge_faces.iter().enumerate().find(|(_, fs)| fs.len() > 2) {
            return Err(Error::InvalidMesh(format!("edge {e} is shared by more than two faces")));
        }

        let boundary_edge: Vec<bool> = edge_faces.iter().map(|fs| fs.len() == 1).collect();
        let mut boundary_vertex = vec![false; n];
        for (id, e) in edges.iter().enumerate() {
            if boundary_edge[id] {
                boundary_vertex[e.a] = true;
                boundary_vertex[e.b] = true;
            }
        }

        // Connectivity of the edge graph over all vertices.
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &e in &vertex_edges[v] {
                let w = if edges[e].a == v { edges[e].b } else { edges[e].a };
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidMesh(format!("mesh is disconnected (vertex {v} unreachable)")));
        }

        let delta_all = 2.0 * edges.iter().map(|e| e.length).sum::<f64>();

        let mut mesh = Mesh {
            positions: input.positions,
            edges,
            faces: input.faces,
            face_edges,
            edge_faces,
            vertex_edges,
            edge_index,
            boundary_edge,
            boundary_vertex,
            delta_all,
            annotations: Annotations::default(),
        };

        let lookup = |mesh: &Mesh, pair: [VertexId; 2], what: &str| -> Result<EdgeId> {
            check_vertex(pair[0], what)?;
            check_vertex(pair[1], what)?;
            mesh.edge_between(pair[0], pair[1]).ok_or_else(|| {
                Error::InvalidMesh(format!("{what} references missing edge {}-{}", pair[0], pair[1]))
            })
        };
        let mut ann = Annotations::default();
        for &s in &input.sinks {
            check_vertex(s, "sinks")?;
            ann.sinks.insert(s);
        }
        for &v in &input.obstacle_vertices {
            check_vertex(v, "obstacles")?;
            ann.obstacle_vertices.insert(v);
        }
        for &p in &input.obstacle_edges {
            ann.obstacle_edges.insert(lookup(&mesh, p, "obstacles")?);
        }
        for &f in &input.obstacle_faces {
            if f >= mesh.faces.len() {
                return Err(Error::InvalidMesh(format!("obstacles reference missing face {f}")));
            }
            ann.obstacle_faces.insert(f);
        }
        for &p in &input.fixed_active {
            ann.fixed_active.insert(lookup(&mesh, p, "fixed_active")?);
        }
        for &p in &input.fixed_inactive {
            ann.fixed_inactive.insert(lookup(&mesh, p, "fixed_inactive")?);
        }
        if let Some(e) = ann.fixed_active.intersection(&ann.fixed_inactive).next() {
            return Err(Error::InvalidMesh(format!(
                "edge {e} is both fixed-active and fixed-inactive"
            )));
        }
        if !input.partition.is_empty() {
            ann.partition = Some(mesh.validate_partition(&input.partition)?);
        }
        mesh.annotations = ann;
        Ok(mesh)
    }

    fn validate_partition(&self, groups: &[Vec<FaceId>]) -> Result<Vec<usize>> {
        let mut label = vec![usize::MAX; self.faces.len()];
        for (l, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidMesh(format!("partition label {l} is empty")));
            }
            for &f in group {
                if f >= self.faces.len() {
                    return Err(Error::InvalidMesh(format!("partition references missing face {f}")));
                }
                if label[f] != usize::MAX {
                    return Err(Error::InvalidMesh(format!("face {f} appears in two partition labels")));
                }
                label[f] = l;
            }
        }
        if let Some(f) = label.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidMesh(format!("face {f} is not covered by the partition")));
        }
        for (l, group) in groups.iter().enumerate() {
            let mut seen = BTreeSet::from([group[0]]);
            let mut stack = vec![group[0]];
            while let Some(f) = stack.pop() {
                for g in self.face_neighbors(f) {
                    if label[g] == l && seen.insert(g) {
                        stack.push(g);
                    }
                }
            }
            if seen.len() != group.len() {
                return Err(Error::InvalidMesh(format!("partition label {l} is not edge-connected")));
            }
        }
        Ok(label)
    }

    /// Returns a copy with replaced annotations, re-validating them.
    pub fn with_annotations(&self, annotations: Annotations) -> Result<Mesh> {
        let n = self.num_vertices();
        let bad_v = annotations
            .sinks
            .iter()
            .chain(&annotations.obstacle_vertices)
            .find(|&&v| v >= n);
        if let Some(v) = bad_v {
            return Err(Error::InvalidMesh(format!("annotation references missing vertex {v}")));
        }
        let bad_e = annotations
            .obstacle_edges
            .iter()
            .chain(&annotations.fixed_active)
            .chain(&annotations.fixed_inactive)
            .find(|&&e| e >= self.num_edges());
        if let Some(e) = bad_e {
            return Err(Error::InvalidMesh(format!("annotation references missing edge {e}")));
        }
        if let Some(e) = annotations.fixed_active.intersection(&annotations.fixed_inactive).next() {
            return Err(Error::InvalidMesh(format!(
                "edge {e} is both fixed-active and fixed-inactive"
            )));
        }
        if let Some(labels) = &annotations.partition {
            if labels.len() != self.num_faces() {
                return Err(Error::InvalidMesh("partition does not cover all faces".into()));
            }
            let count = labels.iter().max().map_or(0, |m| m + 1);
            let mut groups = vec![Vec::new(); count];
            for (f, &l) in labels.iter().enumerate() {
                groups[l].push(f);
            }
            self.validate_partition(&groups)?;
        }
        let mut out = self.clone();
        out.annotations = annotations;
        Ok(out)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_half_edges(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn position(&self, v: VertexId) -> Point {
        self.positions[v]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn face(&self, f: FaceId) -> &[VertexId] {
        &self.faces[f]
    }

    pub fn faces(&self) -> &[Vec<VertexId>] {
        &self.faces
    }

    /// Edges of face `f`, in face order (edge `k` joins corner `k` and `k + 1`).
    pub fn face_edges(&self, f: FaceId) -> &[EdgeId] {
        &self.face_edges[f]
    }

    pub fn edge_faces(&self, e: EdgeId) -> &[FaceId] {
        &self.edge_faces[e]
    }

    /// Faces sharing an edge with `f`.
    pub fn face_neighbors(&self, f: FaceId) -> impl Iterator<Item = FaceId> + '_ {
        self.face_edges[f]
            .iter()
            .flat_map(move |&e| self.edge_faces[e].iter().copied().filter(move |&g| g != f))
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.edge_index.get(&key(u, v)).copied()
    }

    /// Incident edges of `v`, ascending.
    pub fn vertex_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.vertex_edges[v]
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.vertex_edges[v].len()
    }

    pub fn other_end(&self, e: EdgeId, v: VertexId) -> VertexId {
        let edge = &self.edges[e];
        if edge.a == v {
            edge.b
        } else {
            edge.a
        }
    }

    /// Neighbour vertices of `v` in incident-edge order.
    pub fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.vertex_edges[v].iter().map(move |&e| self.other_end(e, v))
    }

    pub fn half_edge_of(&self, e: EdgeId, from: VertexId) -> HalfEdgeId {
        if self.edges[e].a == from {
            2 * e
        } else {
            2 * e + 1
        }
    }

    pub fn half_edge(&self, from: VertexId, to: VertexId) -> Option<HalfEdgeId> {
        self.edge_between(from, to).map(|e| self.half_edge_of(e, from))
    }

    pub fn tail(&self, h: HalfEdgeId) -> VertexId {
        let e = &self.edges[h / 2];
        if h % 2 == 0 {
            e.a
        } else {
            e.b
        }
    }

    pub fn head(&self, h: HalfEdgeId) -> VertexId {
        let e = &self.edges[h / 2];
        if h % 2 == 0 {
            e.b
        } else {
            e.a
        }
    }

    pub fn twin(h: HalfEdgeId) -> HalfEdgeId {
        h ^ 1
    }

    pub fn edge_of(h: HalfEdgeId) -> EdgeId {
        h / 2
    }

    pub fn half_edge_length(&self, h: HalfEdgeId) -> f64 {
        self.edges[h / 2].length
    }

    /// Half-edges leaving `head(h)` other than `twin(h)`.
    pub fn successors(&self, h: HalfEdgeId) -> impl Iterator<Item = HalfEdgeId> + '_ {
        let j = self.head(h);
        let own = h / 2;
        self.vertex_edges[j]
            .iter()
            .filter(move |&&e| e != own)
            .map(move |&e| self.half_edge_of(e, j))
    }

    /// Sum of all half-edge lengths.
    pub fn delta_all(&self) -> f64 {
        self.delta_all
    }

    pub fn is_boundary_edge(&self, e: EdgeId) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_vertex(&self, v: VertexId) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertices(&self) -> Vec<VertexId> {
        (0..self.num_vertices()).filter(|&v| self.boundary_vertex[v]).collect()
    }

    pub fn annotations(&self) -> &Annotations {
        &self.annotations
    }

    pub fn sinks(&self) -> &BTreeSet<VertexId> {
        &self.annotations.sinks
    }

    pub fn partition(&self) -> Option<&[usize]> {
        self.annotations.partition.as_deref()
    }

    pub fn num_partition_labels(&self) -> usize {
        self.partition().map_or(0, |p| p.iter().max().map_or(0, |m| m + 1))
    }

    pub fn face_centroid(&self, f: FaceId) -> Point {
        let face = &self.faces[f];
        let mut c = [0.0, 0.0];
        for &v in face {
            c[0] += self.positions[v][0];
            c[1] += self.positions[v][1];
        }
        let k = face.len() as f64;
        [c[0] / k, c[1] / k]
    }

    pub fn edge_midpoint(&self, e: EdgeId) -> Point {
        let edge = &self.edges[e];
        let (pa, pb) = (self.positions[edge.a], self.positions[edge.b]);
        [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]
    }

    /// Canonical document form of this mesh.
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument::from_mesh(self)
    }
}

/// Parses and validates a mesh document.
pub fn load_mesh(document: &str) -> Result<Mesh> {
    MeshDocument::parse(document)?.into_mesh()
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = grid(1, 1);
        assert_eq!(m.num_edges(), 4);
        assert_eq!(m.num_half_edges(), 8);
        assert!(m.edges().iter().all(|e| e.length == 1.0));
    }

    #[test]
    fn three_by_three_vertex_grid() {
        let m = grid(2, 2);
        assert_eq!(m.num_edges(), 12);
        assert_eq!(m.num_faces(), 4);
        assert_eq!(m.delta_all(), 24.0);
        assert_eq!(m.boundary_vertices().len(), 8);
        assert!(!m.is_boundary_vertex(4));
    }

    #[test]
    fn twin_involution_and_heads() {
        let m = grid(3, 2);
        for h in 0..m.num_half_edges() {
            assert_eq!(Mesh::twin(Mesh::twin(h)), h);
            assert_eq!(m.head(h), m.tail(Mesh::twin(h)));
            assert_eq!(m.half_edge(m.tail(h), m.head(h)), Some(h));
        }
    }

    #[test]
    fn successors_exclude_backtracking() {
        let m = grid(2, 2);
        let h = m.half_edge(1, 4).unwrap();
        let succ: Vec<_> = m.successors(h).map(|s| m.head(s)).collect();
        assert_eq!(succ.len(), 3);
        assert!(!succ.contains(&1));
    }

    #[test]
    fn rejects_disconnected() {
        let mut input = grid_input(1, 1);
        input.positions.push([5.0, 5.0]);
        assert!(matches!(Mesh::new(input), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_conflicting_fixings() {
        let mut input = grid_input(1, 1);
        input.fixed_active.push([0, 1]);
        input.fixed_inactive.push([1, 0]);
        assert!(Mesh::new(input).is_err());
    }

    #[test]
    fn rejects_dangling_index() {
        let mut input = grid_input(1, 1);
        input.faces.push(vec![0, 1, 9]);
        assert!(Mesh::new(input).is_err());
    }

    #[test]
    fn rejects_repeated_edge() {
        let mut input = grid_input(1, 1);
        input.wire_edges.push([0, 1]);
        assert!(Mesh::new(input).is_err());
    }

    #[test]
    fn rejects_disconnected_partition_label() {
        let mut input = grid_input(3, 1);
        input.partition = vec![vec![0, 2], vec![1]];
        assert!(Mesh::new(input).is_err());
    }
}
