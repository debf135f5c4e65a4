use serde::{Deserialize, Serialize};

use super::{Mesh, MeshInput, VertexId};
use crate::error::{Error, Result};

pub const MESH_DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEntry {
    pub id: VertexId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<VertexId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faces: Vec<usize>,
}

impl ObstacleSection {
    fn is_empty(&self) -> bool {
        self.vertices.is_empty() && self.edges.is_empty() && self.faces.is_empty()
    }
}

/// On-disk mesh description (JSON). Sections appear in this field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub version: u32,
    pub vertices: Vec<VertexEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faces: Vec<Vec<VertexId>>,
    /// Edges that bound no face.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sinks: Vec<VertexId>,
    #[serde(default, skip_serializing_if = "ObstacleSection::is_empty")]
    pub obstacles: ObstacleSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partition: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_active: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_inactive: Vec<[VertexId; 2]>,
}

impl MeshDocument {
    pub fn parse(text: &str) -> Result<MeshDocument> {
        let doc: MeshDocument = serde_json::from_str(text)?;
        if doc.version != MESH_DOCUMENT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported mesh document version {} (expected {MESH_DOCUMENT_VERSION})",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn into_mesh(self) -> Result<Mesh> {
        let mut positions = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidMesh(format!(
                    "vertex ids must be 0..n in order; found id {} at position {i}",
                    v.id
                )));
            }
            positions.push([v.x, v.y]);
        }
        Mesh::new(MeshInput {
            positions,
            faces: self.faces,
            wire_edges: self.edges,
            sinks: self.sinks,
            obstacle_vertices: self.obstacles.vertices,
            obstacle_edges: self.obstacles.edges,
            obstacle_faces: self.obstacles.faces,
            partition: self.partition,
            fixed_active: self.fixed_active,
            fixed_inactive: self.fixed_inactive,
        })
    }

    pub fn from_mesh(mesh: &Mesh) -> MeshDocument {
        let pair = |e: usize| {
            let edge = mesh.edge(e);
            [edge.a, edge.b]
        };
        let ann = mesh.annotations();
        let partition = match mesh.partition() {
            Some(labels) => {
                let mut groups = vec![Vec::new(); mesh.num_partition_labels()];
                for (f, &l) in labels.iter().enumerate() {
                    groups[l].push(f);
                }
                groups
            }
            None => Vec::new(),
        };
        MeshDocument {
            version: MESH_DOCUMENT_VERSION,
            vertices: mesh
                .positions()
                .iter()
                .enumerate()
                .map(|(id, p)| VertexEntry { id, x: p[0], y: p[1] })
                .collect(),
            faces: mesh.faces().to_vec(),
            edges: (0..mesh.num_edges())
                .filter(|&e| mesh.edge_faces(e).is_empty())
                .map(pair)
                .collect(),
            sinks: ann.sinks.iter().copied().collect(),
            obstacles: ObstacleSection {
                vertices: ann.obstacle_vertices.iter().copied().collect(),
                edges: ann.obstacle_edges.iter().map(|&e| pair(e)).collect(),
                faces: ann.obstacle_faces.iter().copied().collect(),
            },
            partition,
            fixed_active: ann.fixed_active.iter().map(|&e| pair(e)).collect(),
            fixed_inactive: ann.fixed_inactive.iter().map(|&e| pair(e)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("mesh document serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::load_mesh;

    const SQUARE_WITH_SINK: &str = r#"{
        "version": 1,
        "vertices": [
            {"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 1, "y": 0}, {"id": 2, "x": 2, "y": 0},
            {"id": 3, "x": 0, "y": 1}, {"id": 4, "x": 1, "y": 1}, {"id": 5, "x": 2, "y": 1}
        ],
        "faces": [[0, 1, 4, 3], [1, 2, 5, 4]],
        "sinks": [4]
    }"#;

    #[test]
    fn top_middle_sink_is_singleton() {
        let mesh = load_mesh(SQUARE_WITH_SINK).unwrap();
        assert_eq!(mesh.sinks().iter().copied().collect::<Vec<_>>(), vec![4]);
        assert!(mesh.is_boundary_vertex(4));
    }

    #[test]
    fn canonical_round_trip_is_byte_stable() {
        let mesh = load_mesh(SQUARE_WITH_SINK).unwrap();
        let once = mesh.to_document().to_json();
        let twice = load_mesh(&once).unwrap().to_document().to_json();
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_sections_rejected() {
        let text = r#"{"version": 1, "vertices": [], "extra": 3}"#;
        assert!(matches!(MeshDocument::parse(text), Err(Error::Parse(_))));
    }

    #[test]
    fn wrong_version_rejected() {
        let text = r#"{"version": 7, "vertices": []}"#;
        assert!(MeshDocument::parse(text).is_err());
    }

    #[test]
    fn out_of_order_ids_rejected() {
        let text = r#"{"version": 1, "vertices": [{"id": 1, "x": 0, "y": 0}, {"id": 0, "x": 1, "y": 0}], "edges": [[0, 1]]}"#;
        assert!(load_mesh(text).is_err());
    }
}
