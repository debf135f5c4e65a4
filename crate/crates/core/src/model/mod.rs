//! Solver-agnostic integer program and the builders that translate a mesh plus
//! a functional specification into it.

mod build;
mod patterns;
mod spec;

pub use build::{
    apply_user_fixings, assemble_objective, build_coverage, build_local_features, build_network_model,
    build_point_to_point, build_validity, NetworkContext,
};
pub use patterns::{pattern_instances, PatternInstance, Turn};
pub use spec::{
    BigM, Fixings, ForcedRoute, FunctionalSpec, PatternLibrary, PatternShape, PointToPoint, Policy, ScenarioMode,
    SinkSelection,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, HalfEdgeId, VertexId};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Boolean,
    Continuous,
}

/// What a variable stands for on the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRole {
    Edge(EdgeId),
    HalfEdge(HalfEdgeId),
    Distance(HalfEdgeId),
    Successor { from: HalfEdgeId, to: HalfEdgeId },
    VertexActive(VertexId),
    NonEmpty(HalfEdgeId),
    DeadEnd(HalfEdgeId),
    Branch(VertexId),
    Pattern { kind: u8, half_edge: HalfEdgeId, shape: usize },
    TJunction(HalfEdgeId),
    PathChoice { from: usize, to: usize, index: usize },
    Placement(usize),
    Free,
}

/// `[#pos at 1 + #neg at 0 >= at_least]`: the value a dependent Boolean takes
/// in every optimal completion, written over other Booleans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Threshold {
    pub pos: Vec<VarId>,
    pub neg: Vec<VarId>,
    pub at_least: usize,
}

impl Threshold {
    pub fn any_of(vars: Vec<VarId>) -> Self {
        Threshold {
            pos: vars,
            neg: Vec::new(),
            at_least: 1,
        }
    }

    pub fn all_of(vars: Vec<VarId>) -> Self {
        let n = vars.len();
        Threshold {
            pos: vars,
            neg: Vec::new(),
            at_least: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub role: VarRole,
    pub derivation: Option<Threshold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Comparator {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowFamily {
    SuccessorCap,
    SuccessorDistance,
    SuccessorAny,
    HalfEdgeLink,
    VertexActivity,
    Coverage,
    PathIndicator,
    PathAny,
    NonEmpty,
    DeadEnd,
    Branch,
    Pattern,
    TJunction,
    RouteBranch,
    Tiling,
    RoomInterior,
    RoomAccess,
    RoomCount,
    Other,
}

impl RowFamily {
    /// Rows that tie half-edge, successor and distance variables together.
    pub fn is_network_core(self) -> bool {
        matches!(
            self,
            RowFamily::SuccessorCap | RowFamily::SuccessorDistance | RowFamily::SuccessorAny | RowFamily::HalfEdgeLink
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
    pub family: RowFamily,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

/// Edge/half-edge/distance bookkeeping for the no-island family, indexed by
/// mesh edge and half-edge ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub num_vertices: usize,
    pub endpoints: Vec<[VertexId; 2]>,
    pub lengths: Vec<f64>,
    pub edge_var: Vec<VarId>,
    pub half_var: Vec<VarId>,
    pub dist_var: Vec<VarId>,
    /// `(from, to) -> L` for every successor pair whose `from` head is not a sink.
    pub successor_var: BTreeMap<(HalfEdgeId, HalfEdgeId), VarId>,
    pub sinks: Vec<VertexId>,
    /// Excluded boundary edges that act as an existing surrounding network.
    pub context: Vec<EdgeId>,
    pub big_m: f64,
}

impl NetworkLayout {
    pub fn num_edges(&self) -> usize {
        self.endpoints.len()
    }

    pub fn tail(&self, h: HalfEdgeId) -> VertexId {
        self.endpoints[h / 2][h % 2]
    }

    pub fn head(&self, h: HalfEdgeId) -> VertexId {
        self.endpoints[h / 2][1 - h % 2]
    }
}

/// Linear program over Boolean and bounded continuous variables, minimized.
#[derive(Debug, Clone, Default)]
pub struct IpModel {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    objective: Vec<(VarId, f64)>,
    names: HashMap<String, VarId>,
    layout: Option<NetworkLayout>,
}

impl IpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64, role: VarRole) -> Result<VarId> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(Error::MalformedModel(format!("duplicate variable name {name}")));
        }
        if !(lower <= upper) {
            return Err(Error::MalformedModel(format!("variable {name} has empty bounds [{lower}, {upper}]")));
        }
        if kind == VarKind::Boolean && (lower < 0.0 || upper > 1.0) {
            return Err(Error::MalformedModel(format!("Boolean {name} has bounds outside [0, 1]")));
        }
        let id = self.vars.len();
        self.names.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
            role,
            derivation: None,
        });
        Ok(id)
    }

    pub fn add_bool(&mut self, name: impl Into<String>, role: VarRole) -> Result<VarId> {
        self.add_var(name, VarKind::Boolean, 0.0, 1.0, role)
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, cmp: Comparator, rhs: f64, family: RowFamily) -> Result<()> {
        let name = name.into();
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.vars.len()) {
            return Err(Error::MalformedModel(format!("row {name} references undeclared variable {v}")));
        }
        self.rows.push(Row {
            name,
            terms,
            cmp,
            rhs,
            family,
        });
        Ok(())
    }

    pub fn set_derivation(&mut self, var: VarId, rule: Threshold) {
        self.vars[var].derivation = Some(rule);
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.objective.push((var, coef));
        }
    }

    /// Narrows the bounds of `var` to the single value `value`.
    pub fn fix(&mut self, var: VarId, value: f64) -> Result<()> {
        let v = &mut self.vars[var];
        if value < v.lower || value > v.upper {
            return Err(Error::Infeasible(format!(
                "cannot fix {} to {value}: outside [{}, {}]",
                v.name, v.lower, v.upper
            )));
        }
        v.lower = value;
        v.upper = value;
        Ok(())
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn layout(&self) -> Option<&NetworkLayout> {
        self.layout.as_ref()
    }

    pub(crate) fn set_layout(&mut self, layout: NetworkLayout) {
        self.layout = Some(layout);
    }

    pub fn count_rows(&self, family: RowFamily) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    pub fn vars_with_role(&self, pred: impl Fn(&VarRole) -> bool) -> Vec<VarId> {
        (0..self.vars.len()).filter(|&v| pred(&self.vars[v].role)).collect()
    }

    /// Variables, bounds, rows and objective agree (roles and layout ignored).
    pub fn same_program(&self, other: &IpModel) -> bool {
        let vars_eq = self.vars.len() == other.vars.len()
            && self.vars.iter().zip(&other.vars).all(|(a, b)| {
                a.name == b.name && a.kind == b.kind && a.lower == b.lower && a.upper == b.upper
            });
        let rows_eq = self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.name == b.name && a.terms == b.terms && a.cmp == b.cmp && a.rhs == b.rhs);
        vars_eq && rows_eq && self.objective == other.objective
    }

    /// Checks every structural invariant: row references, bounds, derivations.
    pub fn validate(&self) -> Result<()> {
        for v in &self.vars {
            if !(v.lower <= v.upper) || !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(Error::MalformedModel(format!("variable {} has invalid bounds", v.name)));
            }
            if let Some(rule) = &v.derivation {
                let bad = rule.pos.iter().chain(&rule.neg).any(|&d| d >= self.vars.len());
                if bad || v.kind != VarKind::Boolean {
                    return Err(Error::MalformedModel(format!("variable {} has an invalid derivation", v.name)));
                }
            }
        }
        for r in &self.rows {
            if r.terms.iter().any(|&(v, c)| v >= self.vars.len() || !c.is_finite()) || !r.rhs.is_finite() {
                return Err(Error::MalformedModel(format!("row {} is malformed", r.name)));
            }
        }
        if self.objective.iter().any(|&(v, c)| v >= self.vars.len() || !c.is_finite()) {
            return Err(Error::MalformedModel("objective is malformed".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows_and_duplicates() {
        let mut m = IpModel::new();
        let x = m.add_bool("x", VarRole::Free).unwrap();
        assert!(m.add_bool("x", VarRole::Free).is_err());
        assert!(m.add_row("r", vec![(x + 1, 1.0)], Comparator::Le, 0.0, RowFamily::Other).is_err());
        assert!(m.add_var("y", VarKind::Continuous, 2.0, 1.0, VarRole::Free).is_err());
        m.add_row("r", vec![(x, 1.0)], Comparator::Ge, 1.0, RowFamily::Other).unwrap();
        m.validate().unwrap();
    }

    #[test]
    fn fixing_outside_bounds_is_reported() {
        let mut m = IpModel::new();
        let x = m.add_bool("x", VarRole::Free).unwrap();
        m.fix(x, 0.0).unwrap();
        assert!(matches!(m.fix(x, 1.0), Err(Error::Infeasible(_))));
    }
}
