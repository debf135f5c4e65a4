use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::document::SolutionDocument;
use crate::error::Result;
use crate::mesh::{coverage_neighborhood, EdgeId, FaceId, Mesh, VertexId};
use crate::model::{pattern_instances, FunctionalSpec, NetworkContext, Policy, ScenarioMode};
use crate::solver::{check_validity, compute_distance_values};
use crate::tiling::{RoomTemplate, TilingMode};

/// Counts of local features present in a network.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FeatureScan {
    /// Endpoints of active edges with no other active edge (context vertices exempt).
    pub dead_ends: Vec<VertexId>,
    /// Vertices with three or more active edges.
    pub branches: Vec<VertexId>,
    /// Valence-4 vertices with exactly three active, all-selectable edges.
    pub t_junctions: Vec<VertexId>,
    pub zigzags: usize,
    pub proximities: usize,
}

/// Scans `active` for local features using the same exemptions as the model.
pub fn scan_features(mesh: &Mesh, spec: &FunctionalSpec, active: &BTreeSet<EdgeId>) -> Result<FeatureScan> {
    let ctx = NetworkContext::new(mesh, spec)?;
    let mut scan = FeatureScan::default();
    let degree = |v: VertexId| mesh.vertex_edges(v).iter().filter(|e| active.contains(e)).count();
    for v in 0..mesh.num_vertices() {
        let d = degree(v);
        if d == 1 && !ctx.context_vertex(mesh, v) {
            scan.dead_ends.push(v);
        }
        if d >= 3 {
            scan.branches.push(v);
        }
        if mesh.valence(v) == 4 && d == 3 && mesh.vertex_edges(v).iter().all(|&e| ctx.selectable(e)) {
            scan.t_junctions.push(v);
        }
    }
    let inst = pattern_instances(mesh, &spec.patterns, &|e| ctx.selectable(e));
    for p in inst {
        if p.edges.iter().all(|e| active.contains(e)) {
            if p.kind == 0 {
                scan.zigzags += 1;
            } else {
                scan.proximities += 1;
            }
        }
    }
    Ok(scan)
}

/// Verdict on a solution document, recomputed from the mesh and spec alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub islands: Vec<Vec<EdgeId>>,
    pub uncovered: Vec<VertexId>,
    pub features: FeatureScan,
    pub tiling: Vec<String>,
    /// Every hard requirement that fails, in words.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", if self.is_valid() { "valid" } else { "invalid" });
        let _ = writeln!(out, "islands: {}", self.islands.len());
        let _ = writeln!(out, "uncovered vertices: {}", self.uncovered.len());
        let f = &self.features;
        let _ = writeln!(out, "dead ends: {}", f.dead_ends.len());
        let _ = writeln!(out, "branches: {}", f.branches.len());
        let _ = writeln!(out, "t-junctions: {}", f.t_junctions.len());
        let _ = writeln!(out, "zig-zags: {}", f.zigzags);
        let _ = writeln!(out, "proximity pairs: {}", f.proximities);
        for v in &self.violations {
            let _ = writeln!(out, "violation: {v}");
        }
        out
    }
}

/// Room data needed to check a tiling solution.
#[derive(Debug, Clone, Copy)]
pub struct TilingCheck<'a> {
    pub mode: TilingMode,
    pub templates: &'a [RoomTemplate],
}

pub fn validate_solution(
    mesh: &Mesh,
    spec: &FunctionalSpec,
    doc: &SolutionDocument,
    tiling: Option<TilingCheck<'_>>,
) -> Result<ValidationReport> {
    let ctx = NetworkContext::new(mesh, spec)?;
    let active = doc.edge_set(mesh)?;
    let mut rep = ValidationReport::default();

    rep.islands = check_validity(mesh, &active, &ctx.sinks)?.islands;
    if !rep.islands.is_empty() {
        rep.violations.push(format!("{} island(s) without a sink", rep.islands.len()));
    } else if !active.is_empty() {
        let dv = compute_distance_values(mesh, &active, &ctx.sinks)?;
        for (h, d) in doc.oriented(mesh)? {
            let expect = dv.distance[h];
            if dv.orientation.get(&(h / 2)) != Some(&h) || (expect - d).abs() > 1e-9 * (1.0 + expect.abs()) {
                rep.violations.push(format!("half-edge {} -> {} has a wrong distance value", mesh.tail(h), mesh.head(h)));
            }
        }
    }

    for &e in &ctx.fixed_active {
        if !active.contains(&e) {
            rep.violations.push(format!("fixed edge ({}, {}) is inactive", mesh.edge(e).a, mesh.edge(e).b));
        }
    }
    for &e in &active {
        if !ctx.selectable(e) {
            rep.violations.push(format!("edge ({}, {}) may not be active", mesh.edge(e).a, mesh.edge(e).b));
        }
    }
    let touched: BTreeSet<VertexId> = active.iter().flat_map(|&e| [mesh.edge(e).a, mesh.edge(e).b]).collect();
    for &v in &ctx.active_vertices {
        if !touched.contains(&v) {
            rep.violations.push(format!("vertex {v} must be active"));
        }
    }

    if spec.mode == ScenarioMode::Network {
        for v in 0..mesh.num_vertices() {
            if ctx.inactive_vertices.contains(&v) {
                continue;
            }
            let covered = coverage_neighborhood(mesh, v, spec.coverage_radius)
                .into_iter()
                .any(|u| !ctx.inactive_vertices.contains(&u) && touched.contains(&u));
            if !covered {
                rep.uncovered.push(v);
            }
        }
        if !rep.uncovered.is_empty() {
            rep.violations.push(format!("{} vertices are not covered", rep.uncovered.len()));
        }
    }

    rep.features = scan_features(mesh, spec, &active)?;
    let f = &rep.features;
    let hard = [
        (spec.dead_ends, f.dead_ends.len(), "dead end"),
        (spec.branches, f.branches.len(), "branch"),
        (spec.t_junctions, f.t_junctions.len(), "t-junction"),
        (spec.zigzag, f.zigzags, "zig-zag"),
        (spec.proximity, f.proximities, "proximity pair"),
    ];
    for (policy, count, what) in hard {
        if policy == Policy::Forbidden && count > 0 {
            rep.violations.push(format!("{count} forbidden {what}(s)"));
        }
    }

    if let Some(check) = tiling {
        rep.tiling = check_tiling(mesh, doc, &active, check);
        rep.violations.extend(rep.tiling.iter().cloned());
    }
    Ok(rep)
}

fn check_tiling(mesh: &Mesh, doc: &SolutionDocument, active: &BTreeSet<EdgeId>, check: TilingCheck<'_>) -> Vec<String> {
    let mut out = Vec::new();
    let obstacles = &mesh.annotations().obstacle_faces;
    let mut owner: Vec<Option<usize>> = vec![None; mesh.num_faces()];
    let mut per_template: BTreeMap<usize, usize> = BTreeMap::new();
    for p in &doc.placements {
        *per_template.entry(p.template).or_insert(0) += 1;
        let set: BTreeSet<FaceId> = p.faces.iter().copied().collect();
        for &f in &p.faces {
            if f >= mesh.num_faces() {
                out.push(format!("room {} uses missing face {f}", p.index));
                continue;
            }
            if obstacles.contains(&f) {
                out.push(format!("room {} covers obstacle face {f}", p.index));
            }
            if let Some(o) = owner[f].replace(p.index) {
                out.push(format!("rooms {o} and {} overlap on face {f}", p.index));
            }
        }
        let mut inner_active = 0;
        let mut bnd_active = 0;
        let edges: BTreeSet<EdgeId> = p
            .faces
            .iter()
            .filter(|&&f| f < mesh.num_faces())
            .flat_map(|&f| mesh.face_edges(f).iter().copied())
            .collect();
        for e in edges {
            let inside = mesh.edge_faces(e).iter().filter(|g| set.contains(g)).count();
            if active.contains(&e) {
                if inside >= 2 {
                    inner_active += 1;
                } else {
                    bnd_active += 1;
                }
            }
        }
        match check.mode {
            TilingMode::Floorplan => {
                if inner_active > 0 {
                    out.push(format!("room {} has a corridor inside", p.index));
                }
                if bnd_active == 0 {
                    out.push(format!("room {} does not touch a corridor", p.index));
                }
            }
            TilingMode::Gamelevel => {
                if inner_active == 0 {
                    out.push(format!("block {} is not traversed", p.index));
                }
                if bnd_active > 0 {
                    out.push(format!("block {} has an active boundary edge", p.index));
                }
            }
        }
    }
    for f in 0..mesh.num_faces() {
        if owner[f].is_none() && !obstacles.contains(&f) {
            out.push(format!("face {f} is not covered by a room"));
        }
    }
    for (t, tpl) in check.templates.iter().enumerate() {
        let n = per_template.get(&t).copied().unwrap_or(0);
        if tpl.min.is_some_and(|m| n < m) || tpl.max.is_some_and(|m| n > m) {
            out.push(format!("template {} used {n} times", tpl.name));
        }
    }
    out
}
