use std::collections::BTreeSet;

use super::{EdgeId, FaceId, Mesh, MeshInput, VertexId};
use crate::error::Result;

/// Result of one Catmull–Clark split, with the parent → child maps needed to
/// carry a network onto the finer mesh.
#[derive(Debug, Clone)]
pub struct Subdivision {
    pub mesh: Mesh,
    /// The two child edges of every parent edge.
    pub edge_children: Vec<[EdgeId; 2]>,
    /// Child faces of every parent face, one per corner.
    pub face_children: Vec<Vec<FaceId>>,
    /// Vertex created at the midpoint of every parent edge.
    pub edge_midpoint: Vec<VertexId>,
    /// Vertex created at the centroid of every parent face.
    pub face_center: Vec<VertexId>,
}

impl Subdivision {
    /// Maps a parent edge set onto the child mesh.
    pub fn map_edges(&self, edges: impl IntoIterator<Item = EdgeId>) -> BTreeSet<EdgeId> {
        edges
            .into_iter()
            .flat_map(|e| self.edge_children[e])
            .collect()
    }
}

/// Splits every n-gon into n quads. Original vertices keep their ids and
/// positions; edge midpoints follow, then face centroids.
pub fn catmull_clark_subdivide(mesh: &Mesh) -> Result<Subdivision> {
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let mut positions = mesh.positions().to_vec();
    let edge_midpoint: Vec<VertexId> = (0..ne).map(|e| nv + e).collect();
    for e in 0..ne {
        positions.push(mesh.edge_midpoint(e));
    }
    let face_center: Vec<VertexId> = (0..mesh.num_faces()).map(|f| nv + ne + f).collect();
    for f in 0..mesh.num_faces() {
        positions.push(mesh.face_centroid(f));
    }

    let mut faces = Vec::new();
    let mut face_children = Vec::with_capacity(mesh.num_faces());
    for f in 0..mesh.num_faces() {
        let corners = mesh.face(f);
        let fedges = mesh.face_edges(f);
        let k = corners.len();
        let mut children = Vec::with_capacity(k);
        for i in 0..k {
            let next_edge = fedges[i];
            let prev_edge = fedges[(i + k - 1) % k];
            children.push(faces.len());
            faces.push(vec![
                corners[i],
                edge_midpoint[next_edge],
                face_center[f],
                edge_midpoint[prev_edge],
            ]);
        }
        face_children.push(children);
    }

    let wire_edges: Vec<[VertexId; 2]> = (0..ne)
        .filter(|&e| mesh.edge_faces(e).is_empty())
        .flat_map(|e| {
            let edge = mesh.edge(e);
            [[edge.a, edge_midpoint[e]], [edge_midpoint[e], edge.b]]
        })
        .collect();

    let ann = mesh.annotations();
    let halves = |e: EdgeId| {
        let edge = mesh.edge(e);
        [[edge.a, edge_midpoint[e]], [edge_midpoint[e], edge.b]]
    };
    let partition = match mesh.partition() {
        Some(labels) => {
            let mut groups = vec![Vec::new(); mesh.num_partition_labels()];
            for (f, &l) in labels.iter().enumerate() {
                groups[l].extend(&face_children[f]);
            }
            groups
        }
        None => Vec::new(),
    };
    let child = Mesh::new(MeshInput {
        positions,
        faces,
        wire_edges,
        sinks: ann.sinks.iter().copied().collect(),
        obstacle_vertices: ann.obstacle_vertices.iter().copied().collect(),
        obstacle_edges: ann.obstacle_edges.iter().flat_map(|&e| halves(e)).collect(),
        obstacle_faces: ann
            .obstacle_faces
            .iter()
            .flat_map(|&f| face_children[f].iter().copied())
            .collect(),
        partition,
        fixed_active: ann.fixed_active.iter().flat_map(|&e| halves(e)).collect(),
        fixed_inactive: ann.fixed_inactive.iter().flat_map(|&e| halves(e)).collect(),
    })?;

    let edge_children = (0..ne)
        .map(|e| {
            let [h0, h1] = halves(e);
            [
                child.edge_between(h0[0], h0[1]).expect("child edge exists"),
                child.edge_between(h1[0], h1[1]).expect("child edge exists"),
            ]
        })
        .collect();

    Ok(Subdivision {
        mesh: child,
        edge_children,
        face_children,
        edge_midpoint,
        face_center,
    })
}

/// Merges child annotations back onto the parent (inverse of propagation).
#[cfg(test)]
pub(crate) fn merge_child_annotations(sub: &Subdivision, parent: &Mesh) -> super::Annotations {
    let child = sub.mesh.annotations();
    let nv = parent.num_vertices();
    let edge_set = |set: &BTreeSet<EdgeId>| -> BTreeSet<EdgeId> {
        (0..parent.num_edges())
            .filter(|&e| sub.edge_children[e].iter().all(|c| set.contains(c)))
            .collect()
    };
    super::Annotations {
        sinks: child.sinks.iter().copied().filter(|&v| v < nv).collect(),
        obstacle_vertices: child.obstacle_vertices.iter().copied().filter(|&v| v < nv).collect(),
        obstacle_edges: edge_set(&child.obstacle_edges),
        obstacle_faces: (0..parent.num_faces())
            .filter(|&f| sub.face_children[f].iter().all(|c| child.obstacle_faces.contains(c)))
            .collect(),
        fixed_active: edge_set(&child.fixed_active),
        fixed_inactive: edge_set(&child.fixed_inactive),
        partition: child.partition.as_ref().map(|labels| {
            (0..parent.num_faces())
                .map(|f| labels[sub.face_children[f][0]])
                .collect()
        }),
    }
}
