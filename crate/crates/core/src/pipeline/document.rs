use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, FaceId, HalfEdgeId, Mesh, VertexId};
use crate::model::ScenarioMode;
use crate::solver::{NetworkSolution, ObjectiveBreakdown, SolveStatus};
use crate::tiling::RoomPlacement;

pub const SOLUTION_DOCUMENT_VERSION: u32 = 1;

/// Chosen direction of an active edge and its distance value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfEdgeEntry {
    pub from: VertexId,
    pub to: VertexId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementEntry {
    pub index: usize,
    pub template: usize,
    pub faces: Vec<FaceId>,
}

/// Mesh-independent record of a solve, keyed by vertex ids so it can be
/// checked against the mesh it came from. Contains nothing time-dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDocument {
    pub version: u32,
    #[serde(default)]
    pub level: Option<usize>,
    pub mode: ScenarioMode,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    #[serde(default)]
    pub breakdown: Option<ObjectiveBreakdown>,
    pub sinks: Vec<VertexId>,
    pub active_edges: Vec<[VertexId; 2]>,
    pub half_edges: Vec<HalfEdgeEntry>,
    #[serde(default)]
    pub placements: Vec<PlacementEntry>,
}

impl SolutionDocument {
    pub fn from_solution(
        mesh: &Mesh,
        solution: &NetworkSolution,
        sinks: &BTreeSet<VertexId>,
        mode: ScenarioMode,
        level: Option<usize>,
        placements: &[RoomPlacement],
    ) -> SolutionDocument {
        let active_edges = solution
            .active_edges
            .iter()
            .map(|&e| [mesh.edge(e).a, mesh.edge(e).b])
            .collect();
        let half_edges = solution
            .orientation
            .values()
            .map(|&h| HalfEdgeEntry {
                from: mesh.tail(h),
                to: mesh.head(h),
                distance: solution.distances.get(h).copied().unwrap_or(0.0),
            })
            .collect();
        let placements = solution
            .placements
            .iter()
            .filter_map(|&x| {
                placements.get(x).map(|p| PlacementEntry {
                    index: x,
                    template: p.template,
                    faces: p.faces.clone(),
                })
            })
            .collect();
        SolutionDocument {
            version: SOLUTION_DOCUMENT_VERSION,
            level,
            mode,
            status: solution.status,
            objective: solution.objective,
            breakdown: solution.breakdown,
            sinks: sinks.iter().copied().collect(),
            active_edges,
            half_edges,
            placements,
        }
    }

    pub fn parse(text: &str) -> Result<SolutionDocument> {
        let doc: SolutionDocument = serde_json::from_str(text)?;
        if doc.version != SOLUTION_DOCUMENT_VERSION {
            return Err(Error::Parse(format!("unsupported solution document version {}", doc.version)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn edge_set(&self, mesh: &Mesh) -> Result<BTreeSet<EdgeId>> {
        self.active_edges
            .iter()
            .map(|&[a, b]| {
                mesh.edge_between(a, b)
                    .ok_or_else(|| Error::InvalidQuery(format!("({a}, {b}) is not a mesh edge")))
            })
            .collect()
    }

    /// Half-edge ids with their recorded distance values.
    pub fn oriented(&self, mesh: &Mesh) -> Result<Vec<(HalfEdgeId, f64)>> {
        self.half_edges
            .iter()
            .map(|h| {
                mesh.half_edge(h.from, h.to)
                    .map(|id| (id, h.distance))
                    .ok_or_else(|| Error::InvalidQuery(format!("({}, {}) is not a mesh edge", h.from, h.to)))
            })
            .collect()
    }
}
