use std::collections::{BTreeMap, BTreeSet};

use super::{
    pattern_instances, Comparator, FunctionalSpec, IpModel, NetworkLayout, Policy, RowFamily, ScenarioMode,
    SinkSelection, Threshold, VarId, VarKind, VarRole,
};
use crate::error::{Error, Result};
use crate::mesh::{
    coverage_neighborhood, enumerate_near_shortest_paths_filtered, sample_partition_vertices, EdgeId, Mesh, Path,
    VertexId,
};

/// Resolved per-instance facts shared by the builders: sinks, which edges may
/// be selected at all, and the routes and samples the spec asks for.
#[derive(Debug, Clone)]
pub struct NetworkContext {
    pub sinks: BTreeSet<VertexId>,
    /// Edges that may take either value.
    pub candidate: Vec<bool>,
    /// Boundary edges removed from selection.
    pub excluded: Vec<bool>,
    pub fixed_active: BTreeSet<EdgeId>,
    pub fixed_inactive: BTreeSet<EdgeId>,
    pub active_vertices: BTreeSet<VertexId>,
    /// Obstacle and user-inactive vertices.
    pub inactive_vertices: BTreeSet<VertexId>,
    pub forced_paths: Vec<Path>,
}

fn edge_by_pair(mesh: &Mesh, [u, v]: [VertexId; 2]) -> Result<EdgeId> {
    if u >= mesh.num_vertices() || v >= mesh.num_vertices() {
        return Err(Error::InvalidSpec(format!("edge ({u}, {v}) references a missing vertex")));
    }
    mesh.edge_between(u, v)
        .ok_or_else(|| Error::InvalidSpec(format!("({u}, {v}) is not a mesh edge")))
}

impl NetworkContext {
    pub fn new(mesh: &Mesh, spec: &FunctionalSpec) -> Result<NetworkContext> {
        spec.validate()?;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let ann = mesh.annotations();
        let check_vertex = |v: VertexId| {
            if v < nv {
                Ok(v)
            } else {
                Err(Error::InvalidSpec(format!("vertex {v} does not exist")))
            }
        };

        let mut inactive_vertices: BTreeSet<VertexId> = ann.obstacle_vertices.clone();
        for &v in &spec.fixings.inactive_vertices {
            inactive_vertices.insert(check_vertex(v)?);
        }
        let mut active_vertices = BTreeSet::new();
        for &v in &spec.fixings.active_vertices {
            active_vertices.insert(check_vertex(v)?);
        }
        if let Some(v) = active_vertices.intersection(&inactive_vertices).next() {
            return Err(Error::InvalidSpec(format!("vertex {v} is fixed both active and inactive")));
        }

        let mut fixed_active = ann.fixed_active.clone();
        for &pair in &spec.fixings.active_edges {
            fixed_active.insert(edge_by_pair(mesh, pair)?);
        }
        let mut fixed_inactive: BTreeSet<EdgeId> = ann.fixed_inactive.union(&ann.obstacle_edges).copied().collect();
        for &pair in &spec.fixings.inactive_edges {
            fixed_inactive.insert(edge_by_pair(mesh, pair)?);
        }
        for &v in &inactive_vertices {
            fixed_inactive.extend(mesh.vertex_edges(v).iter().copied());
        }
        if let Some(e) = fixed_active.intersection(&fixed_inactive).next() {
            let edge = mesh.edge(*e);
            return Err(Error::InvalidSpec(format!(
                "edge ({}, {}) is fixed both active and inactive",
                edge.a, edge.b
            )));
        }

        let exclude = spec.excludes_boundary();
        let excluded: Vec<bool> = (0..ne)
            .map(|e| exclude && mesh.is_boundary_edge(e) && !fixed_active.contains(&e))
            .collect();
        let mut candidate: Vec<bool> = (0..ne)
            .map(|e| !excluded[e] && !fixed_inactive.contains(&e))
            .collect();

        let sinks: BTreeSet<VertexId> = match &spec.sinks {
            SinkSelection::Mesh => mesh.sinks().clone(),
            SinkSelection::AllBoundary => mesh
                .boundary_vertices()
                .into_iter()
                .filter(|v| !ann.obstacle_vertices.contains(v))
                .collect(),
            SinkSelection::Vertices(list) => list.iter().map(|&v| check_vertex(v)).collect::<Result<_>>()?,
        };
        if sinks.is_empty() {
            return Err(Error::InvalidSpec("sink set is empty".into()));
        }

        let mut forced_paths = Vec::new();
        for route in &spec.forced_routes {
            check_vertex(route.from)?;
            check_vertex(route.to)?;
            let allowed = |e: EdgeId| candidate[e] || fixed_active.contains(&e);
            let paths = enumerate_near_shortest_paths_filtered(mesh, route.from, route.to, 0, &allowed)
                .map_err(|e| Error::InvalidSpec(format!("forced route {} -> {}: {e}", route.from, route.to)))?;
            let path = paths.into_iter().next().expect("connected endpoints have a path");
            forced_paths.push(path);
        }
        for path in &forced_paths {
            for &e in &path.edges {
                fixed_active.insert(e);
                candidate[e] = true;
            }
        }

        Ok(NetworkContext {
            sinks,
            candidate,
            excluded,
            fixed_active,
            fixed_inactive,
            active_vertices,
            inactive_vertices,
            forced_paths,
        })
    }

    /// Edges that may be active in some solution (free or fixed active).
    pub fn selectable(&self, e: EdgeId) -> bool {
        self.candidate[e]
    }

    /// Touches an excluded boundary edge.
    pub fn context_vertex(&self, mesh: &Mesh, v: VertexId) -> bool {
        mesh.vertex_edges(v).iter().any(|&e| self.excluded[e])
    }
}

fn pair_name(mesh: &Mesh, h: usize) -> String {
    format!("{}_{}", mesh.tail(h), mesh.head(h))
}

/// No-island rows with half-edge, successor and distance variables, half-edge
/// linking and vertex activity.
pub fn build_validity(mesh: &Mesh, spec: &FunctionalSpec, ctx: &NetworkContext, model: &mut IpModel) -> Result<()> {
    let ne = mesh.num_edges();
    let nh = mesh.num_half_edges();
    let delta_all = mesh.delta_all();
    let big_m = match spec.big_m {
        super::BigM::Full => delta_all,
        super::BigM::Tight => {
            let min_len = mesh.edges().iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
            delta_all - min_len
        }
    };

    let mut edge_var = Vec::with_capacity(ne);
    for e in 0..ne {
        let edge = mesh.edge(e);
        edge_var.push(model.add_bool(format!("E_{}_{}", edge.a, edge.b), VarRole::Edge(e))?);
    }
    let mut half_var = Vec::with_capacity(nh);
    for h in 0..nh {
        half_var.push(model.add_bool(format!("H_{}", pair_name(mesh, h)), VarRole::HalfEdge(h))?);
    }
    let mut dist_var = Vec::with_capacity(nh);
    for h in 0..nh {
        dist_var.push(model.add_var(
            format!("D_{}", pair_name(mesh, h)),
            VarKind::Continuous,
            0.0,
            delta_all,
            VarRole::Distance(h),
        )?);
    }
    let mut successor_var = BTreeMap::new();
    for h in 0..nh {
        if ctx.sinks.contains(&mesh.head(h)) {
            continue;
        }
        for s in mesh.successors(h) {
            let name = format!("L_{}_{}_{}", mesh.tail(h), mesh.head(h), mesh.head(s));
            let id = model.add_bool(name, VarRole::Successor { from: h, to: s })?;
            successor_var.insert((h, s), id);
        }
    }

    for h in 0..nh {
        if ctx.sinks.contains(&mesh.head(h)) {
            continue;
        }
        let name = pair_name(mesh, h);
        let len = mesh.half_edge_length(h);
        let mut any = vec![(half_var[h], 1.0)];
        for s in mesh.successors(h) {
            let l = successor_var[&(h, s)];
            let k = mesh.head(s);
            model.add_row(
                format!("succ_cap_{name}_{k}"),
                vec![(l, 1.0), (half_var[s], -1.0)],
                Comparator::Le,
                0.0,
                RowFamily::SuccessorCap,
            )?;
            model.add_row(
                format!("succ_dist_{name}_{k}"),
                vec![(dist_var[s], 1.0), (dist_var[h], -1.0), (l, big_m)],
                Comparator::Le,
                big_m - len,
                RowFamily::SuccessorDistance,
            )?;
            any.push((l, -1.0));
        }
        model.add_row(format!("succ_any_{name}"), any, Comparator::Le, 0.0, RowFamily::SuccessorAny)?;
    }

    for e in 0..ne {
        let edge = mesh.edge(e);
        let terms = vec![(half_var[2 * e], 1.0), (half_var[2 * e + 1], 1.0), (edge_var[e], -2.0)];
        model.add_row(
            format!("link_hi_{}_{}", edge.a, edge.b),
            terms.clone(),
            Comparator::Le,
            0.0,
            RowFamily::HalfEdgeLink,
        )?;
        model.add_row(
            format!("link_lo_{}_{}", edge.a, edge.b),
            terms,
            Comparator::Ge,
            -1.0,
            RowFamily::HalfEdgeLink,
        )?;
    }

    for y in 0..mesh.num_vertices() {
        let v = model.add_bool(format!("V_{y}"), VarRole::VertexActive(y))?;
        let incident: Vec<VarId> = mesh.vertex_edges(y).iter().map(|&e| edge_var[e]).collect();
        model.set_derivation(v, Threshold::any_of(incident.clone()));
        let k = incident.len() as f64;
        let mut terms: Vec<(VarId, f64)> = incident.iter().map(|&x| (x, 1.0)).collect();
        terms.push((v, -k));
        model.add_row(format!("vact_hi_{y}"), terms.clone(), Comparator::Le, 0.0, RowFamily::VertexActivity)?;
        model.add_row(format!("vact_lo_{y}"), terms, Comparator::Ge, 1.0 - k, RowFamily::VertexActivity)?;
    }

    model.set_layout(NetworkLayout {
        num_vertices: mesh.num_vertices(),
        endpoints: mesh.edges().iter().map(|e| [e.a, e.b]).collect(),
        lengths: mesh.edges().iter().map(|e| e.length).collect(),
        edge_var,
        half_var,
        dist_var,
        successor_var,
        sinks: ctx.sinks.iter().copied().collect(),
        context: (0..ne).filter(|&e| ctx.excluded[e]).collect(),
        big_m,
    });
    Ok(())
}

fn vertex_var(model: &IpModel, y: VertexId) -> VarId {
    model.var_by_name(&format!("V_{y}")).expect("vertex variables are built first")
}

fn layout(model: &IpModel) -> Result<&NetworkLayout> {
    model
        .layout()
        .ok_or_else(|| Error::MalformedModel("validity family must be built first".into()))
}

/// One cover row per vertex over the vertices within the hop radius.
pub fn build_coverage(mesh: &Mesh, spec: &FunctionalSpec, ctx: &NetworkContext, model: &mut IpModel) -> Result<()> {
    layout(model)?;
    for v in 0..mesh.num_vertices() {
        if ctx.inactive_vertices.contains(&v) {
            continue;
        }
        let cover: Vec<(VarId, f64)> = coverage_neighborhood(mesh, v, spec.coverage_radius)
            .into_iter()
            .filter(|u| !ctx.inactive_vertices.contains(u))
            .map(|u| (vertex_var(model, u), 1.0))
            .collect();
        if cover.is_empty() {
            return Err(Error::Infeasible(format!("vertex {v} can only be covered by obstacle vertices")));
        }
        model.add_row(format!("cover_{v}"), cover, Comparator::Ge, 1.0, RowFamily::Coverage)?;
    }
    Ok(())
}

/// Path indicators between the sampled vertices of every pair of adjacent
/// sub-meshes, with at least one path active per pair.
pub fn build_point_to_point(
    mesh: &Mesh,
    spec: &FunctionalSpec,
    ctx: &NetworkContext,
    sampled: &BTreeMap<usize, VertexId>,
    model: &mut IpModel,
) -> Result<()> {
    let edge_var = layout(model)?.edge_var.clone();
    let labels = mesh
        .partition()
        .ok_or_else(|| Error::InvalidSpec("point-to-point needs a mesh partition".into()))?;
    let mut pairs = BTreeSet::new();
    for e in 0..mesh.num_edges() {
        if let [f, g] = *mesh.edge_faces(e) {
            let (a, b) = (labels[f], labels[g]);
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    for (a, b) in pairs {
        let (va, vb) = match (sampled.get(&a), sampled.get(&b)) {
            (Some(&va), Some(&vb)) => (va, vb),
            _ => return Err(Error::InvalidSpec(format!("no sampled vertex for sub-mesh {a} or {b}"))),
        };
        if va == vb {
            continue;
        }
        let allowed = |e: EdgeId| ctx.selectable(e);
        let paths = enumerate_near_shortest_paths_filtered(mesh, va, vb, spec.point_to_point.tolerance, &allowed)
            .map_err(|_| Error::Infeasible(format!("sub-meshes {a} and {b} have no connecting path")))?;
        if paths.is_empty() {
            return Err(Error::Infeasible(format!("sub-meshes {a} and {b} have no connecting path")));
        }
        let mut any = Vec::with_capacity(paths.len());
        for (x, path) in paths.iter().enumerate() {
            let p = model.add_bool(format!("P_{a}_{b}_{x}"), VarRole::PathChoice { from: a, to: b, index: x })?;
            let members: Vec<VarId> = path.edges.iter().map(|&e| edge_var[e]).collect();
            model.set_derivation(p, Threshold::all_of(members.clone()));
            let n = members.len() as f64;
            let mut terms = vec![(p, n)];
            terms.extend(members.iter().map(|&m| (m, -1.0)));
            model.add_row(format!("path_ind_hi_{a}_{b}_{x}"), terms.clone(), Comparator::Le, 0.0, RowFamily::PathIndicator)?;
            model.add_row(format!("path_ind_lo_{a}_{b}_{x}"), terms, Comparator::Ge, 1.0 - n, RowFamily::PathIndicator)?;
            any.push((p, 1.0));
        }
        model.add_row(format!("path_any_{a}_{b}"), any, Comparator::Ge, 1.0, RowFamily::PathAny)?;
    }
    Ok(())
}

fn add_policy_indicator(model: &mut IpModel, var: VarId, policy: Policy) -> Result<()> {
    if policy.is_forbidden() {
        model.fix(var, 0.0)?;
    }
    Ok(())
}

/// Dead-end, branch, pattern and T-junction families for every policy that is
/// not `allowed`.
pub fn build_local_features(mesh: &Mesh, spec: &FunctionalSpec, ctx: &NetworkContext, model: &mut IpModel) -> Result<()> {
    let edge_var = layout(model)?.edge_var.clone();
    let nh = mesh.num_half_edges();

    if spec.dead_ends != Policy::Allowed {
        for h in 0..nh {
            let e = h / 2;
            let j = mesh.head(h);
            if !ctx.selectable(e) || ctx.context_vertex(mesh, j) {
                continue;
            }
            let name = pair_name(mesh, h);
            let others: Vec<VarId> = mesh
                .vertex_edges(j)
                .iter()
                .filter(|&&x| x != e)
                .map(|&x| edge_var[x])
                .collect();
            let nu = model.add_bool(format!("N_{name}"), VarRole::NonEmpty(h))?;
            model.set_derivation(nu, Threshold::any_of(others.clone()));
            let k = others.len() as f64;
            if others.is_empty() {
                model.fix(nu, 0.0)?;
            } else {
                let mut terms: Vec<(VarId, f64)> = others.iter().map(|&x| (x, 1.0)).collect();
                terms.push((nu, -k));
                model.add_row(format!("nonempty_hi_{name}"), terms.clone(), Comparator::Le, 0.0, RowFamily::NonEmpty)?;
                model.add_row(format!("nonempty_lo_{name}"), terms, Comparator::Ge, 1.0 - k, RowFamily::NonEmpty)?;
            }
            match spec.dead_ends {
                Policy::Forbidden => {
                    model.add_row(
                        format!("deadend_{name}"),
                        vec![(edge_var[e], 1.0), (nu, -1.0)],
                        Comparator::Le,
                        0.0,
                        RowFamily::DeadEnd,
                    )?;
                }
                Policy::Penalized(_) => {
                    let d = model.add_bool(format!("DE_{name}"), VarRole::DeadEnd(h))?;
                    model.set_derivation(
                        d,
                        Threshold {
                            pos: vec![edge_var[e]],
                            neg: others.clone(),
                            at_least: 1 + others.len(),
                        },
                    );
                    model.add_row(
                        format!("deadend_{name}"),
                        vec![(edge_var[e], 1.0), (nu, -1.0), (d, -1.0)],
                        Comparator::Le,
                        0.0,
                        RowFamily::DeadEnd,
                    )?;
                }
                Policy::Allowed => unreachable!(),
            }
        }
    }

    if spec.branches != Policy::Allowed {
        for y in 0..mesh.num_vertices() {
            let incident: Vec<VarId> = mesh
                .vertex_edges(y)
                .iter()
                .filter(|&&e| ctx.selectable(e))
                .map(|&e| edge_var[e])
                .collect();
            if incident.len() < 3 {
                continue;
            }
            let mut terms: Vec<(VarId, f64)> = incident.iter().map(|&x| (x, 1.0)).collect();
            if let Policy::Penalized(_) = spec.branches {
                let b = model.add_bool(format!("B_{y}"), VarRole::Branch(y))?;
                model.set_derivation(
                    b,
                    Threshold {
                        pos: incident.clone(),
                        neg: Vec::new(),
                        at_least: 3,
                    },
                );
                terms.push((b, -(incident.len() as f64 - 2.0)));
            }
            model.add_row(format!("branch_{y}"), terms, Comparator::Le, 2.0, RowFamily::Branch)?;
        }
    }

    let enabled_kinds = [spec.zigzag != Policy::Allowed, spec.proximity != Policy::Allowed];
    if enabled_kinds.iter().any(|&k| k) {
        let candidate = |e: EdgeId| ctx.selectable(e);
        let mut counter: BTreeMap<(u8, usize), usize> = BTreeMap::new();
        for inst in pattern_instances(mesh, &spec.patterns, &candidate) {
            if !enabled_kinds[inst.kind as usize] {
                continue;
            }
            let policy = if inst.kind == 0 { spec.zigzag } else { spec.proximity };
            let n = counter.entry((inst.kind, inst.half_edge)).or_insert(0);
            let name = format!("{}_{}_{}", inst.kind, pair_name(mesh, inst.half_edge), n);
            *n += 1;
            let z = model.add_bool(
                format!("Z{name}"),
                VarRole::Pattern {
                    kind: inst.kind,
                    half_edge: inst.half_edge,
                    shape: inst.shape,
                },
            )?;
            let members: Vec<VarId> = inst.edges.iter().map(|&e| edge_var[e]).collect();
            model.set_derivation(z, Threshold::all_of(members.clone()));
            let size = members.len() as f64;
            let mut terms: Vec<(VarId, f64)> = members.iter().map(|&m| (m, 1.0)).collect();
            terms.push((z, -size));
            model.add_row(format!("pat_lo_{name}"), terms.clone(), Comparator::Ge, 0.0, RowFamily::Pattern)?;
            model.add_row(format!("pat_hi_{name}"), terms, Comparator::Le, size - 1.0, RowFamily::Pattern)?;
            add_policy_indicator(model, z, policy)?;
        }
    }

    if spec.t_junctions != Policy::Allowed {
        for h in 0..nh {
            let e0 = h / 2;
            let j = mesh.head(h);
            if mesh.valence(j) != 4 || !ctx.selectable(e0) {
                continue;
            }
            let others: Vec<VarId> = mesh
                .vertex_edges(j)
                .iter()
                .filter(|&&x| x != e0)
                .map(|&x| edge_var[x])
                .collect();
            if !mesh.vertex_edges(j).iter().all(|&x| ctx.selectable(x)) {
                continue;
            }
            let name = pair_name(mesh, h);
            let t = model.add_bool(format!("T_{name}"), VarRole::TJunction(h))?;
            model.set_derivation(
                t,
                Threshold {
                    pos: others.clone(),
                    neg: vec![edge_var[e0]],
                    at_least: 4,
                },
            );
            let mut terms: Vec<(VarId, f64)> = others.iter().map(|&x| (x, 1.0)).collect();
            terms.push((edge_var[e0], -1.0));
            terms.push((t, -4.0));
            model.add_row(format!("tjunc_lo_{name}"), terms.clone(), Comparator::Ge, -1.0, RowFamily::TJunction)?;
            model.add_row(format!("tjunc_hi_{name}"), terms, Comparator::Le, 2.0, RowFamily::TJunction)?;
            add_policy_indicator(model, t, spec.t_junctions)?;
        }
    }
    Ok(())
}

/// Fixed edge and vertex states, excluded boundary edges and forced routes.
pub fn apply_user_fixings(mesh: &Mesh, ctx: &NetworkContext, model: &mut IpModel) -> Result<()> {
    let edge_var = layout(model)?.edge_var.clone();
    for e in 0..mesh.num_edges() {
        if ctx.fixed_active.contains(&e) {
            model.fix(edge_var[e], 1.0)?;
        } else if !ctx.candidate[e] {
            model.fix(edge_var[e], 0.0)?;
        }
    }
    for &v in &ctx.inactive_vertices {
        model.fix(vertex_var(model, v), 0.0)?;
    }
    for &v in &ctx.active_vertices {
        model.fix(vertex_var(model, v), 1.0)?;
    }
    let mut route_interior = BTreeSet::new();
    for path in &ctx.forced_paths {
        route_interior.extend(path.interior_vertices().iter().copied());
    }
    for v in route_interior {
        let terms: Vec<(VarId, f64)> = mesh.vertex_edges(v).iter().map(|&e| (edge_var[e], 1.0)).collect();
        model.add_row(format!("route_branch_{v}"), terms, Comparator::Le, 2.0, RowFamily::RouteBranch)?;
    }
    Ok(())
}

/// Weighted length, distance and feature-penalty objective.
pub fn assemble_objective(mesh: &Mesh, spec: &FunctionalSpec, model: &mut IpModel) -> Result<()> {
    let lay = layout(model)?.clone();
    for e in 0..mesh.num_edges() {
        model.add_objective(lay.edge_var[e], spec.lambda_length * mesh.edge(e).length);
    }
    for &d in &lay.dist_var {
        model.add_objective(d, spec.lambda_distance);
    }
    let weight = |p: Policy| match p {
        Policy::Penalized(w) => w,
        _ => 0.0,
    };
    for v in 0..model.num_vars() {
        let w = match model.var(v).role {
            VarRole::Pattern { kind: 0, .. } => weight(spec.zigzag),
            VarRole::Pattern { .. } => weight(spec.proximity),
            VarRole::TJunction(_) => weight(spec.t_junctions),
            VarRole::DeadEnd(_) => weight(spec.dead_ends),
            VarRole::Branch(_) => weight(spec.branches),
            _ => 0.0,
        };
        model.add_objective(v, w);
    }
    Ok(())
}

/// Full network program for `spec` on `mesh`. Tiling modes omit coverage; the
/// caller adds placement families.
pub fn build_network_model(mesh: &Mesh, spec: &FunctionalSpec) -> Result<IpModel> {
    let ctx = NetworkContext::new(mesh, spec)?;
    let mut model = IpModel::new();
    build_validity(mesh, spec, &ctx, &mut model)?;
    if spec.mode == ScenarioMode::Network {
        build_coverage(mesh, spec, &ctx, &mut model)?;
    }
    if spec.point_to_point.enabled {
        let sampled = sample_partition_vertices(mesh, spec.point_to_point.seed)?;
        build_point_to_point(mesh, spec, &ctx, &sampled, &mut model)?;
    }
    build_local_features(mesh, spec, &ctx, &mut model)?;
    apply_user_fixings(mesh, &ctx, &mut model)?;
    assemble_objective(mesh, spec, &mut model)?;
    model.validate()?;
    Ok(model)
}
