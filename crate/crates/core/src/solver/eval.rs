use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::oracle::{orient, HalfEdgeGraph, DistanceValues};
use crate::error::{Error, Result};
use crate::mesh::EdgeId;
use crate::model::{Comparator, IpModel, Row, Threshold, VarId, VarKind, VarRole};

pub(crate) const TOL: f64 = 1e-9;

/// Booleans the search decides directly; every other variable follows from
/// them (derivations, or the distance completion for the network core).
pub(crate) fn is_primary(model: &IpModel, v: VarId) -> bool {
    let var = model.var(v);
    var.kind == VarKind::Boolean
        && var.derivation.is_none()
        && !matches!(var.role, VarRole::HalfEdge(_) | VarRole::Successor { .. })
}

pub(crate) fn threshold_value(rule: &Threshold, values: &[f64]) -> f64 {
    let count = rule.pos.iter().filter(|&&v| values[v] > 0.5).count() + rule.neg.iter().filter(|&&v| values[v] < 0.5).count();
    if count >= rule.at_least {
        1.0
    } else {
        0.0
    }
}

/// Per-term split of an objective value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub length: f64,
    pub distance: f64,
    pub zigzag: f64,
    pub proximity: f64,
    pub t_junction: f64,
    pub dead_end: f64,
    pub branch: f64,
    pub other: f64,
    pub total: f64,
}

pub fn objective_breakdown(model: &IpModel, values: &[f64]) -> ObjectiveBreakdown {
    let mut b = ObjectiveBreakdown::default();
    for &(v, c) in model.objective() {
        let x = c * values[v];
        match model.var(v).role {
            VarRole::Edge(_) => b.length += x,
            VarRole::Distance(_) => b.distance += x,
            VarRole::Pattern { kind: 0, .. } => b.zigzag += x,
            VarRole::Pattern { .. } => b.proximity += x,
            VarRole::TJunction(_) => b.t_junction += x,
            VarRole::DeadEnd(_) => b.dead_end += x,
            VarRole::Branch(_) => b.branch += x,
            _ => b.other += x,
        }
        b.total += x;
    }
    b
}

/// Complete assignment produced from the primary values.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    /// Names of rows and variables whose constraints fail; empty when feasible.
    pub violations: Vec<String>,
    pub objective: f64,
    pub distances: Option<DistanceValues>,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(crate) fn row_satisfied(row: &Row, values: &[f64], model: &IpModel) -> bool {
    let integral = row.rhs.fract() == 0.0
        && row
            .terms
            .iter()
            .all(|&(v, c)| c.fract() == 0.0 && model.var(v).kind == VarKind::Boolean);
    if integral {
        let act: i64 = row.terms.iter().map(|&(v, c)| c as i64 * values[v].round() as i64).sum();
        let rhs = row.rhs as i64;
        return match row.cmp {
            Comparator::Le => act <= rhs,
            Comparator::Ge => act >= rhs,
            Comparator::Eq => act == rhs,
        };
    }
    let act = row.activity(values);
    let scale: f64 = 1.0 + row.rhs.abs() + row.terms.iter().map(|&(v, c)| (c * values[v]).abs()).sum::<f64>();
    let tol = TOL * scale;
    match row.cmp {
        Comparator::Le => act <= row.rhs + tol,
        Comparator::Ge => act >= row.rhs - tol,
        Comparator::Eq => (act - row.rhs).abs() <= tol,
    }
}

/// Fills the half-edge, successor and distance variables from the edge
/// values with the minimum-distance completion. Returns `None` when some
/// active edge cannot reach a sink.
fn complete_network(model: &IpModel, values: &mut [f64]) -> Option<Option<DistanceValues>> {
    let Some(lay) = model.layout() else {
        return Some(None);
    };
    let graph = HalfEdgeGraph::from_layout(lay);
    let active: Vec<bool> = lay.edge_var.iter().map(|&v| values[v] > 0.5).collect();
    let mut is_sink = vec![false; lay.num_vertices];
    for &s in &lay.sinks {
        is_sink[s] = true;
    }
    let dv = orient(&graph, &active, &is_sink)?;
    let nh = lay.half_var.len();
    let chosen: Vec<bool> = (0..nh).map(|h| dv.orientation.get(&(h / 2)) == Some(&h)).collect();
    for h in 0..nh {
        values[lay.half_var[h]] = if chosen[h] { 1.0 } else { 0.0 };
        values[lay.dist_var[h]] = dv.distance[h];
    }
    for &l in lay.successor_var.values() {
        values[l] = 0.0;
    }
    // each chosen half-edge points at its best successor, which is chosen too
    for h in 0..nh {
        if !chosen[h] || is_sink[lay.head(h)] {
            continue;
        }
        let want = dv.distance[h] - lay.lengths[h / 2];
        let best = lay
            .successor_var
            .range((h, 0)..(h + 1, 0))
            .filter(|(&(_, s), _)| chosen[s])
            .min_by(|a, b| dv.distance[a.0 .1].total_cmp(&dv.distance[b.0 .1]).then(a.0 .1.cmp(&b.0 .1)));
        if let Some((&(_, s), &l)) = best {
            if (dv.distance[s] - want).abs() <= TOL * (1.0 + want.abs()) {
                values[l] = 1.0;
            }
        }
    }
    // inactive half-edges take the smallest value their successor rows allow
    for _ in 0..nh.max(1) {
        let mut changed = false;
        for (&(h, s), &l) in &lay.successor_var {
            if chosen[h] || values[l] > 0.5 {
                continue;
            }
            let floor = values[lay.dist_var[s]] - lay.big_m + lay.lengths[h / 2];
            if floor > values[lay.dist_var[h]] {
                values[lay.dist_var[h]] = floor;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Some(Some(dv))
}

/// Derives every dependent variable from the primaries in `values` and checks
/// all bounds and rows exactly.
pub fn evaluate(model: &IpModel, primary_values: &[f64]) -> Result<Evaluation> {
    if primary_values.len() != model.num_vars() {
        return Err(Error::InvalidQuery(format!(
            "assignment has {} entries, model has {} variables",
            primary_values.len(),
            model.num_vars()
        )));
    }
    let mut values = primary_values.to_vec();
    for v in 0..model.num_vars() {
        if let Some(rule) = &model.var(v).derivation {
            values[v] = threshold_value(rule, &values);
        }
    }
    let mut violations = Vec::new();
    let distances = match complete_network(model, &mut values) {
        Some(d) => d,
        None => {
            violations.push("island".to_string());
            None
        }
    };
    if violations.is_empty() {
        for (v, var) in model.vars().iter().enumerate() {
            let x = values[v];
            if x < var.lower - TOL || x > var.upper + TOL {
                violations.push(var.name.clone());
            }
        }
        for row in model.rows() {
            if !row_satisfied(row, &values, model) {
                violations.push(row.name.clone());
            }
        }
    }
    let objective = model.objective().iter().map(|&(v, c)| c * values[v]).sum();
    Ok(Evaluation {
        values,
        violations,
        objective,
        distances,
    })
}

/// Evaluates the network given by `edges`, with all other primaries at their
/// lower bounds. Shared by the solver tests, brute-force oracles and the
/// stochastic baseline so every path reports the same objective.
pub fn evaluate_edge_set(model: &IpModel, edges: &BTreeSet<EdgeId>) -> Result<Evaluation> {
    let lay = model
        .layout()
        .ok_or_else(|| Error::InvalidQuery("model has no network layout".into()))?;
    let mut values: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
    for (e, &var) in lay.edge_var.iter().enumerate() {
        values[var] = if edges.contains(&e) { 1.0 } else { 0.0 };
    }
    evaluate(model, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;
    use crate::model::{build_network_model, FunctionalSpec, Policy, SinkSelection};

    fn spec() -> FunctionalSpec {
        FunctionalSpec {
            sinks: SinkSelection::Vertices(vec![0]),
            exclude_boundary: Some(false),
            coverage_radius: 1,
            lambda_distance: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn witness_satisfies_every_row() {
        let m = grid(2, 2);
        let model = build_network_model(&m, &spec()).unwrap();
        let all: BTreeSet<EdgeId> = (0..m.num_edges()).collect();
        let ev = evaluate_edge_set(&model, &all).unwrap();
        assert!(ev.is_feasible(), "{:?}", ev.violations);
        let b = objective_breakdown(&model, &ev.values);
        assert_eq!(b.length, 12.0);
        assert!((b.total - ev.objective).abs() < 1e-12);
    }

    #[test]
    fn island_is_infeasible() {
        let m = grid(2, 2);
        let model = build_network_model(&m, &spec()).unwrap();
        let far = m.edge_between(7, 8).unwrap();
        let ev = evaluate_edge_set(&model, &BTreeSet::from([far])).unwrap();
        assert!(!ev.is_feasible());
    }

    #[test]
    fn forbidden_dead_end_detected() {
        let m = grid(1, 1);
        let mut s = spec();
        s.coverage_radius = 2;
        s.dead_ends = Policy::Forbidden;
        let model = build_network_model(&m, &s).unwrap();
        let ev = evaluate_edge_set(&model, &BTreeSet::from([m.edge_between(0, 1).unwrap()])).unwrap();
        assert!(ev.violations.iter().any(|v| v.starts_with("deadend")));
        let ev = evaluate_edge_set(&model, &(0..4).collect()).unwrap();
        assert!(ev.is_feasible());
    }
}
