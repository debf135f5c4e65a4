use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, is_primary, objective_breakdown, ObjectiveBreakdown, TOL};
use super::oracle::HalfEdgeGraph;
use crate::error::{Error, Result};
use crate::mesh::{EdgeId, HalfEdgeId};
use crate::model::{Comparator, IpModel, RowFamily, VarId, VarKind, VarRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Node limit; unlike the time limit it keeps deterministic runs reproducible.
    pub node_limit: Option<u64>,
    /// Relative optimality gap at which subtrees are pruned.
    pub gap: f64,
    /// Single-threaded search with a fixed exploration order.
    pub deterministic: bool,
    /// Worker threads for subtree exploration (`None` = all cores).
    pub threads: Option<usize>,
    /// Keep the objective of every new incumbent.
    pub record_incumbents: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: None,
            node_limit: None,
            gap: 0.0,
            deterministic: false,
            threads: None,
            record_incumbents: false,
        }
    }
}

impl SolveOptions {
    pub fn deterministic() -> Self {
        SolveOptions {
            deterministic: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(Error::InvalidQuery("time limit must be positive".into()));
            }
        }
        if !(self.gap >= 0.0) {
            return Err(Error::InvalidQuery("gap must be >= 0".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidQuery("thread count must be positive".into()));
        }
        Ok(())
    }

    fn parallel(&self) -> bool {
        !self.deterministic && self.threads != Some(1) && crate::par::available()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleIncumbent,
    Infeasible,
    TimeoutNoIncumbent,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleIncumbent)
    }
}

/// Result of a solve: the selected network and how good it is known to be.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub status: SolveStatus,
    pub active_edges: BTreeSet<EdgeId>,
    /// Chosen half-edge of every active edge.
    pub orientation: BTreeMap<EdgeId, HalfEdgeId>,
    /// `D` per half-edge, zero for half-edges that are not chosen.
    pub distances: Vec<f64>,
    /// Indices of selected room placements.
    pub placements: Vec<usize>,
    pub objective: Option<f64>,
    pub breakdown: Option<ObjectiveBreakdown>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub nodes: u64,
    pub elapsed_seconds: f64,
    /// `(seconds, objective)` for each improving incumbent, when recorded.
    pub incumbents: Vec<(f64, f64)>,
    /// Complete variable assignment of the incumbent.
    pub values: Vec<f64>,
}

impl NetworkSolution {
    /// Relative gap between incumbent and bound.
    pub fn gap(&self) -> Option<f64> {
        self.objective
            .map(|o| if o == self.bound { 0.0 } else { (o - self.bound).abs() / o.abs().max(1e-9) })
    }
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Prim(usize),
    Derived(usize),
}

#[derive(Debug, Clone)]
struct PRow {
    terms: Vec<(Term, f64)>,
    cmp: Comparator,
    rhs: f64,
}

#[derive(Debug, Clone)]
struct Derived {
    pos: Vec<usize>,
    neg: Vec<usize>,
    at_least: usize,
}

type Vals = Vec<i8>;

struct Problem<'a> {
    model: &'a IpModel,
    prims: Vec<VarId>,
    derived_var: Vec<VarId>,
    derived: Vec<Derived>,
    rows: Vec<PRow>,
    prim_rows: Vec<Vec<usize>>,
    root: Vals,
    prim_cost: Vec<f64>,
    derived_cost: Vec<f64>,
    edge_prim: Vec<Option<usize>>,
    dist_cost: Vec<f64>,
    graph: Option<HalfEdgeGraph>,
    is_sink: Vec<bool>,
    /// Per coverage row: member derived indices and the primaries that can satisfy it.
    cover: Vec<(Vec<usize>, Vec<usize>)>,
    /// Primaries of exact-cover rows.
    exact: Vec<Vec<usize>>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a IpModel) -> Result<Problem<'a>> {
        model.validate()?;
        let n = model.num_vars();
        let lay = model.layout();
        let mut prim_of = vec![usize::MAX; n];
        let mut prims = Vec::new();
        let mut der_of = vec![usize::MAX; n];
        let mut derived_var = Vec::new();
        let mut is_dist = vec![false; n];
        if let Some(l) = lay {
            for &d in &l.dist_var {
                is_dist[d] = true;
            }
        }
        for v in 0..n {
            let var = model.var(v);
            if is_primary(model, v) {
                prim_of[v] = prims.len();
                prims.push(v);
            } else if var.derivation.is_some() {
                der_of[v] = derived_var.len();
                derived_var.push(v);
            } else if var.kind == VarKind::Continuous && !is_dist[v] {
                return Err(Error::MalformedModel(format!(
                    "continuous variable {} is outside the network layout",
                    var.name
                )));
            } else if lay.is_none() {
                return Err(Error::MalformedModel(format!("variable {} needs a network layout", var.name)));
            }
        }
        let mut derived = Vec::with_capacity(derived_var.len());
        for &v in &derived_var {
            let rule = model.var(v).derivation.as_ref().expect("derived");
            let map = |list: &[VarId]| -> Result<Vec<usize>> {
                list.iter()
                    .map(|&x| {
                        if prim_of[x] == usize::MAX {
                            Err(Error::MalformedModel(format!(
                                "derivation of {} depends on a non-primary variable",
                                model.var(v).name
                            )))
                        } else {
                            Ok(prim_of[x])
                        }
                    })
                    .collect()
            };
            derived.push(Derived {
                pos: map(&rule.pos)?,
                neg: map(&rule.neg)?,
                at_least: rule.at_least,
            });
        }

        let mut rows = Vec::new();
        let mut cover = Vec::new();
        let mut exact = Vec::new();
        for row in model.rows() {
            if row.family.is_network_core() {
                continue;
            }
            let mut terms = Vec::with_capacity(row.terms.len());
            let mut ok = true;
            for &(v, c) in &row.terms {
                if prim_of[v] != usize::MAX {
                    terms.push((Term::Prim(prim_of[v]), c));
                } else if der_of[v] != usize::MAX {
                    terms.push((Term::Derived(der_of[v]), c));
                } else {
                    ok = false;
                }
            }
            if !ok {
                continue;
            }
            if row.family == RowFamily::Coverage && row.cmp == Comparator::Ge {
                let members: Vec<usize> = terms
                    .iter()
                    .filter_map(|t| match t.0 {
                        Term::Derived(d) => Some(d),
                        _ => None,
                    })
                    .collect();
                let mut enablers: BTreeSet<usize> = BTreeSet::new();
                for &d in &members {
                    enablers.extend(derived[d].pos.iter().copied());
                }
                cover.push((members, enablers.into_iter().collect()));
            }
            if row.family == RowFamily::Tiling && row.cmp == Comparator::Eq {
                exact.push(
                    terms
                        .iter()
                        .filter_map(|t| match t.0 {
                            Term::Prim(p) => Some(p),
                            _ => None,
                        })
                        .collect(),
                );
            }
            rows.push(PRow {
                terms,
                cmp: row.cmp,
                rhs: row.rhs,
            });
        }
        for (d, &v) in derived_var.iter().enumerate() {
            let var = model.var(v);
            if var.upper < 0.5 {
                rows.push(PRow {
                    terms: vec![(Term::Derived(d), 1.0)],
                    cmp: Comparator::Le,
                    rhs: 0.0,
                });
            }
            if var.lower > 0.5 {
                rows.push(PRow {
                    terms: vec![(Term::Derived(d), 1.0)],
                    cmp: Comparator::Ge,
                    rhs: 1.0,
                });
            }
        }

        let mut derived_of_prim: Vec<Vec<usize>> = vec![Vec::new(); prims.len()];
        for (d, rule) in derived.iter().enumerate() {
            for &p in rule.pos.iter().chain(&rule.neg) {
                derived_of_prim[p].push(d);
            }
        }
        let mut derived_rows: Vec<Vec<usize>> = vec![Vec::new(); derived.len()];
        let mut prim_rows: Vec<Vec<usize>> = vec![Vec::new(); prims.len()];
        for (r, row) in rows.iter().enumerate() {
            for &(t, _) in &row.terms {
                match t {
                    Term::Prim(p) => prim_rows[p].push(r),
                    Term::Derived(d) => derived_rows[d].push(r),
                }
            }
        }
        for p in 0..prims.len() {
            for &d in &derived_of_prim[p] {
                prim_rows[p].extend(derived_rows[d].iter().copied());
            }
            prim_rows[p].sort_unstable();
            prim_rows[p].dedup();
        }

        let root: Vals = prims
            .iter()
            .map(|&v| {
                let var = model.var(v);
                if var.lower > 0.5 {
                    1
                } else if var.upper < 0.5 {
                    0
                } else {
                    -1
                }
            })
            .collect();

        let mut prim_cost = vec![0.0; prims.len()];
        let mut derived_cost = vec![0.0; derived.len()];
        let mut var_cost = vec![0.0; n];
        for &(v, c) in model.objective() {
            var_cost[v] += c;
            if prim_of[v] != usize::MAX {
                prim_cost[prim_of[v]] += c;
            } else if der_of[v] != usize::MAX {
                derived_cost[der_of[v]] += c;
            }
        }
        let (edge_prim, dist_cost, graph, is_sink) = match lay {
            Some(l) => {
                let mut is_sink = vec![false; l.num_vertices];
                for &s in &l.sinks {
                    is_sink[s] = true;
                }
                (
                    l.edge_var
                        .iter()
                        .map(|&v| (prim_of[v] != usize::MAX).then_some(prim_of[v]))
                        .collect(),
                    l.dist_var.iter().map(|&v| var_cost[v]).collect(),
                    Some(HalfEdgeGraph::from_layout(l)),
                    is_sink,
                )
            }
            None => (Vec::new(), Vec::new(), None, Vec::new()),
        };

        Ok(Problem {
            model,
            prims,
            derived_var,
            derived,
            rows,
            prim_rows,
            root,
            prim_cost,
            derived_cost,
            edge_prim,
            dist_cost,
            graph,
            is_sink,
            cover,
            exact,
        })
    }

    fn counts(&self, d: usize, vals: &Vals) -> (usize, usize) {
        let rule = &self.derived[d];
        let (mut lo, mut hi) = (0, 0);
        for &p in &rule.pos {
            match vals[p] {
                1 => {
                    lo += 1;
                    hi += 1
                }
                -1 => hi += 1,
                _ => {}
            }
        }
        for &p in &rule.neg {
            match vals[p] {
                0 => {
                    lo += 1;
                    hi += 1
                }
                -1 => hi += 1,
                _ => {}
            }
        }
        (lo, hi)
    }

    fn derived_range(&self, d: usize, vals: &Vals) -> (f64, f64) {
        let (lo, hi) = self.counts(d, vals);
        let at = self.derived[d].at_least;
        ((lo >= at) as u8 as f64, (hi >= at) as u8 as f64)
    }

    fn term_range(&self, t: Term, vals: &Vals) -> (f64, f64) {
        match t {
            Term::Prim(p) => match vals[p] {
                -1 => (0.0, 1.0),
                x => (x as f64, x as f64),
            },
            Term::Derived(d) => self.derived_range(d, vals),
        }
    }

    fn set(&self, p: usize, value: i8, vals: &mut Vals, queue: &mut VecDeque<usize>, queued: &mut [bool]) -> bool {
        match vals[p] {
            -1 => {
                vals[p] = value;
                for &r in &self.prim_rows[p] {
                    if !queued[r] {
                        queued[r] = true;
                        queue.push_back(r);
                    }
                }
                true
            }
            x => x == value,
        }
    }

    /// Forces derived `d` to `value` by fixing its undecided members where the
    /// outcome is already determined. Returns false on contradiction.
    fn require(&self, d: usize, value: bool, vals: &mut Vals, queue: &mut VecDeque<usize>, queued: &mut [bool]) -> bool {
        let (lo, hi) = self.counts(d, vals);
        let rule = &self.derived[d];
        let at = rule.at_least;
        if value {
            if hi < at {
                return false;
            }
            if hi == at {
                for &p in &rule.pos {
                    if vals[p] == -1 && !self.set(p, 1, vals, queue, queued) {
                        return false;
                    }
                }
                for &p in &rule.neg {
                    if vals[p] == -1 && !self.set(p, 0, vals, queue, queued) {
                        return false;
                    }
                }
            }
        } else {
            if lo >= at {
                return false;
            }
            if lo + 1 == at {
                for &p in &rule.pos {
                    if vals[p] == -1 && !self.set(p, 0, vals, queue, queued) {
                        return false;
                    }
                }
                for &p in &rule.neg {
                    if vals[p] == -1 && !self.set(p, 1, vals, queue, queued) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// One-sided `sum <= rhs` reasoning on `sign * row`.
    fn propagate_le(
        &self,
        row: &PRow,
        sign: f64,
        rhs: f64,
        vals: &mut Vals,
        queue: &mut VecDeque<usize>,
        queued: &mut [bool],
    ) -> bool {
        let mut min_act = 0.0;
        for &(t, c) in &row.terms {
            let (lo, hi) = self.term_range(t, vals);
            let c = sign * c;
            min_act += if c >= 0.0 { c * lo } else { c * hi };
        }
        let slack = rhs - min_act;
        let eps = TOL * (1.0 + rhs.abs());
        if slack < -eps {
            return false;
        }
        for &(t, c) in &row.terms {
            let c = sign * c;
            if c.abs() <= slack + eps {
                continue;
            }
            let (lo, hi) = self.term_range(t, vals);
            if lo == hi {
                continue;
            }
            // the term must stay at the value that achieves its minimum
            let want = c < 0.0;
            let ok = match t {
                Term::Prim(p) => self.set(p, want as i8, vals, queue, queued),
                Term::Derived(d) => self.require(d, want, vals, queue, queued),
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn propagate(&self, vals: &mut Vals, seed: Option<&[usize]>) -> bool {
        let mut queued = vec![false; self.rows.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        match seed {
            Some(rows) => {
                for &r in rows {
                    if !queued[r] {
                        queued[r] = true;
                        queue.push_back(r);
                    }
                }
            }
            None => {
                queue.extend(0..self.rows.len());
                queued.iter_mut().for_each(|q| *q = true);
            }
        }
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            let row = &self.rows[r];
            let ok = match row.cmp {
                Comparator::Le => self.propagate_le(row, 1.0, row.rhs, vals, &mut queue, &mut queued),
                Comparator::Ge => self.propagate_le(row, -1.0, -row.rhs, vals, &mut queue, &mut queued),
                Comparator::Eq => {
                    self.propagate_le(row, 1.0, row.rhs, vals, &mut queue, &mut queued)
                        && self.propagate_le(row, -1.0, -row.rhs, vals, &mut queue, &mut queued)
                }
            };
            if !ok {
                return false;
            }
        }
        self.islands_reachable(vals)
    }

    /// Every edge fixed active must still be able to reach a sink through
    /// edges that are active or undecided.
    fn islands_reachable(&self, vals: &Vals) -> bool {
        let Some(g) = &self.graph else { return true };
        let open = |e: usize| match self.edge_prim[e] {
            Some(p) => vals[p] != 0,
            None => false,
        };
        let mut seen_v = vec![false; g.num_vertices()];
        let mut stack: Vec<usize> = (0..g.num_vertices()).filter(|&v| self.is_sink[v]).collect();
        for &v in &stack {
            seen_v[v] = true;
        }
        while let Some(v) = stack.pop() {
            for &e in &g.vertex_edges[v] {
                if !open(e) {
                    continue;
                }
                let w = g.endpoints[e][0] + g.endpoints[e][1] - v;
                if !seen_v[w] {
                    seen_v[w] = true;
                    stack.push(w);
                }
            }
        }
        (0..g.num_edges()).all(|e| match self.edge_prim[e] {
            Some(p) if vals[p] == 1 => seen_v[g.endpoints[e][0]],
            _ => true,
        })
    }

    fn lower_bound(&self, vals: &Vals) -> f64 {
        let mut lb = 0.0;
        for (p, &c) in self.prim_cost.iter().enumerate() {
            let (lo, hi) = self.term_range(Term::Prim(p), vals);
            lb += if c >= 0.0 { c * lo } else { c * hi };
        }
        for (d, &c) in self.derived_cost.iter().enumerate() {
            if c != 0.0 {
                let (lo, hi) = self.derived_range(d, vals);
                lb += if c >= 0.0 { c * lo } else { c * hi };
            }
        }
        if let Some(g) = &self.graph {
            if self.dist_cost.iter().any(|&c| c != 0.0) && self.dist_cost.iter().all(|&c| c >= 0.0) {
                let open: Vec<bool> = (0..g.num_edges())
                    .map(|e| self.edge_prim[e].is_some_and(|p| vals[p] != 0))
                    .collect();
                let dist = g.distances(&open, &self.is_sink);
                for e in 0..g.num_edges() {
                    if self.edge_prim[e].is_some_and(|p| vals[p] == 1) {
                        let a = self.dist_cost[2 * e] * dist[2 * e];
                        let b = self.dist_cost[2 * e + 1] * dist[2 * e + 1];
                        let m = a.min(b);
                        if m.is_finite() {
                            lb += m;
                        }
                    }
                }
            }
        }
        // disjoint unsatisfied cover rows each need one more primary
        let mut used: BTreeSet<usize> = BTreeSet::new();
        let mut pending: Vec<(usize, Vec<usize>)> = Vec::new();
        for (members, enablers) in &self.cover {
            if members.iter().any(|&d| self.derived_range(d, vals).0 > 0.5) {
                continue;
            }
            let free: Vec<usize> = enablers.iter().copied().filter(|&p| vals[p] == -1).collect();
            pending.push((free.len(), free));
        }
        pending.sort();
        for (_, free) in pending {
            if free.is_empty() || free.iter().any(|p| used.contains(p)) {
                continue;
            }
            let cheapest = free.iter().map(|&p| self.prim_cost[p]).fold(f64::INFINITY, f64::min);
            if cheapest > 0.0 {
                lb += cheapest;
            }
            used.extend(free);
        }
        lb
    }

    /// Next primary to branch on and the value to try first.
    fn choose(&self, vals: &Vals) -> Option<(usize, i8)> {
        let mut open_cover: Vec<&Vec<usize>> = Vec::new();
        for (members, enablers) in &self.cover {
            if members.iter().any(|&d| self.derived_range(d, vals).0 > 0.5) {
                continue;
            }
            open_cover.push(enablers);
        }
        if !open_cover.is_empty() {
            let mut touch: BTreeMap<usize, usize> = BTreeMap::new();
            for en in &open_cover {
                for &p in en.iter() {
                    if vals[p] == -1 {
                        *touch.entry(p).or_insert(0) += 1;
                    }
                }
            }
            let row = open_cover
                .iter()
                .filter(|en| en.iter().any(|&p| vals[p] == -1))
                .min_by_key(|en| en.iter().filter(|&&p| vals[p] == -1).count());
            if let Some(en) = row {
                let p = en
                    .iter()
                    .copied()
                    .filter(|&p| vals[p] == -1)
                    .max_by(|&a, &b| touch[&a].cmp(&touch[&b]).then(b.cmp(&a)))
                    .expect("row has a free primary");
                return Some((p, 1));
            }
        }
        let exact = self
            .exact
            .iter()
            .filter(|ps| !ps.iter().any(|&p| vals[p] == 1) && ps.iter().any(|&p| vals[p] == -1))
            .min_by_key(|ps| ps.iter().filter(|&&p| vals[p] == -1).count());
        if let Some(ps) = exact {
            let p = ps.iter().copied().find(|&p| vals[p] == -1).expect("free placement");
            return Some((p, 1));
        }
        let p = (0..self.prims.len()).find(|&p| vals[p] == -1)?;
        Some((p, if self.prim_cost[p] > 0.0 { 0 } else { 1 }))
    }

    fn leaf(&self, vals: &Vals) -> Option<(f64, Vec<f64>)> {
        let mut values: Vec<f64> = self.model.vars().iter().map(|v| v.lower).collect();
        for (p, &v) in self.prims.iter().enumerate() {
            values[v] = vals[p] as f64;
        }
        let ev = evaluate(self.model, &values).ok()?;
        ev.is_feasible().then_some((ev.objective, ev.values))
    }
}

struct Shared {
    best_bits: AtomicU64,
    best: Mutex<Option<(f64, Vec<f64>)>>,
    nodes: AtomicU64,
    stop: AtomicBool,
    start: Instant,
    time_limit: Option<f64>,
    node_limit: Option<u64>,
    gap: f64,
    record: bool,
    incumbents: Mutex<Vec<(f64, f64)>>,
}

impl Shared {
    fn best(&self) -> f64 {
        f64::from_bits(self.best_bits.load(Ordering::Acquire))
    }

    fn prunes(&self, lb: f64) -> bool {
        let best = self.best();
        best.is_finite() && lb >= best - self.gap * best.abs() - TOL * (1.0 + best.abs())
    }

    fn offer(&self, obj: f64, values: Vec<f64>) {
        let mut guard = self.best.lock().expect("incumbent lock");
        let better = match &*guard {
            None => true,
            Some((b, _)) => obj < *b - TOL * (1.0 + b.abs()),
        };
        if better {
            *guard = Some((obj, values));
            self.best_bits.store(obj.to_bits(), Ordering::Release);
            if self.record {
                let t = self.start.elapsed().as_secs_f64();
                self.incumbents.lock().expect("incumbent log").push((t, obj));
            }
        }
    }

    fn tick(&self) -> bool {
        if self.stop.load(Ordering::Relaxed) {
            return false;
        }
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        let over_nodes = self.node_limit.is_some_and(|l| n > l);
        let over_time = self.time_limit.is_some_and(|t| self.start.elapsed().as_secs_f64() > t);
        if over_nodes || over_time {
            self.stop.store(true, Ordering::Relaxed);
            return false;
        }
        true
    }
}

fn dfs(prob: &Problem, vals: Vals, shared: &Shared) {
    if !shared.tick() {
        return;
    }
    if shared.prunes(prob.lower_bound(&vals)) {
        return;
    }
    let Some((p, first)) = prob.choose(&vals) else {
        if let Some((obj, values)) = prob.leaf(&vals) {
            shared.offer(obj, values);
        }
        return;
    };
    for value in [first, 1 - first] {
        let mut child = vals.clone();
        child[p] = value;
        if prob.propagate(&mut child, Some(&prob.prim_rows[p])) {
            dfs(prob, child, shared);
        }
        if shared.stop.load(Ordering::Relaxed) {
            return;
        }
    }
}

/// Open nodes below `vals`, expanded breadth-first until there are at least
/// `want` of them (leaves are kept as they are).
fn frontier(prob: &Problem, vals: Vals, want: usize, shared: &Shared) -> Vec<Vals> {
    let mut open = VecDeque::from([vals]);
    let mut done = Vec::new();
    while open.len() + done.len() < want {
        let Some(node) = open.pop_front() else { break };
        if !shared.tick() {
            open.push_front(node);
            break;
        }
        let Some((p, first)) = prob.choose(&node) else {
            done.push(node);
            continue;
        };
        for value in [first, 1 - first] {
            let mut child = node.clone();
            child[p] = value;
            if prob.propagate(&mut child, Some(&prob.prim_rows[p])) {
                open.push_back(child);
            }
        }
    }
    done.extend(open);
    done
}

/// Branch-and-bound over the primary Booleans with the network core
/// completed exactly at every leaf.
pub fn solve(model: &IpModel, options: &SolveOptions) -> Result<NetworkSolution> {
    options.validate()?;
    let prob = Problem::new(model)?;
    let shared = Shared {
        best_bits: AtomicU64::new(f64::INFINITY.to_bits()),
        best: Mutex::new(None),
        nodes: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        start: Instant::now(),
        time_limit: options.time_limit,
        node_limit: options.node_limit,
        gap: options.gap,
        record: options.record_incumbents,
        incumbents: Mutex::new(Vec::new()),
    };
    let mut root = prob.root.clone();
    let feasible_root = prob.propagate(&mut root, None);
    let root_bound = if feasible_root { prob.lower_bound(&root) } else { f64::INFINITY };
    if feasible_root {
        if options.parallel() {
            let threads = options.threads.unwrap_or_else(crate::par::threads);
            let nodes = frontier(&prob, root, 4 * threads, &shared);
            crate::par::map_with_threads(nodes, options.threads, |node| dfs(&prob, node, &shared));
        } else {
            dfs(&prob, root, &shared);
        }
    }
    let stopped = shared.stop.load(Ordering::Relaxed);
    let best = shared.best.into_inner().expect("incumbent lock");
    let nodes = shared.nodes.load(Ordering::Relaxed);
    let elapsed = shared.start.elapsed().as_secs_f64();
    let incumbents = shared.incumbents.into_inner().expect("incumbent log");

    let Some((objective, values)) = best else {
        let status = if stopped {
            SolveStatus::TimeoutNoIncumbent
        } else {
            SolveStatus::Infeasible
        };
        return Ok(NetworkSolution {
            status,
            active_edges: BTreeSet::new(),
            orientation: BTreeMap::new(),
            distances: model.layout().map(|l| vec![0.0; l.half_var.len()]).unwrap_or_default(),
            placements: Vec::new(),
            objective: None,
            breakdown: None,
            bound: if stopped { root_bound } else { f64::INFINITY },
            nodes,
            elapsed_seconds: elapsed,
            incumbents,
            values: Vec::new(),
        });
    };
    let status = if stopped {
        SolveStatus::FeasibleIncumbent
    } else {
        SolveStatus::Optimal
    };
    let bound = if stopped || options.gap > 0.0 {
        root_bound.min(objective)
    } else {
        objective
    };
    let _ = &prob.derived_var;
    Ok(solution_from_values(model, status, values, objective, bound, nodes, elapsed, incumbents))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solution_from_values(
    model: &IpModel,
    status: SolveStatus,
    values: Vec<f64>,
    objective: f64,
    bound: f64,
    nodes: u64,
    elapsed: f64,
    incumbents: Vec<(f64, f64)>,
) -> NetworkSolution {
    let mut active_edges = BTreeSet::new();
    let mut orientation = BTreeMap::new();
    let mut distances = Vec::new();
    if let Some(lay) = model.layout() {
        distances = vec![0.0; lay.half_var.len()];
        for (e, &v) in lay.edge_var.iter().enumerate() {
            if values[v] > 0.5 {
                active_edges.insert(e);
            }
        }
        for h in 0..lay.half_var.len() {
            if values[lay.half_var[h]] > 0.5 && active_edges.contains(&(h / 2)) {
                orientation.entry(h / 2).or_insert(h);
                distances[h] = values[lay.dist_var[h]];
            }
        }
    }
    let placements = model
        .vars()
        .iter()
        .enumerate()
        .filter_map(|(v, var)| match var.role {
            VarRole::Placement(x) if values[v] > 0.5 => Some(x),
            _ => None,
        })
        .collect();
    NetworkSolution {
        status,
        active_edges,
        orientation,
        distances,
        placements,
        objective: Some(objective),
        breakdown: Some(objective_breakdown(model, &values)),
        bound,
        nodes,
        elapsed_seconds: elapsed,
        incumbents,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;
    use crate::model::{build_network_model, FunctionalSpec, Policy, SinkSelection};
    use crate::solver::eval::evaluate_edge_set;

    #[test]
    fn two_by_two_all_boundary_sinks() {
        let m = grid(2, 2);
        let spec = FunctionalSpec {
            sinks: SinkSelection::AllBoundary,
            dead_ends: Policy::Forbidden,
            ..Default::default()
        };
        let model = build_network_model(&m, &spec).unwrap();
        let sol = solve(&model, &SolveOptions::deterministic()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, Some(2.0));
        assert!(evaluate_edge_set(&model, &sol.active_edges).unwrap().is_feasible());
    }

    #[test]
    fn all_inactive_with_radius_zero_is_infeasible() {
        let m = grid(1, 1);
        let spec = FunctionalSpec {
            sinks: SinkSelection::Vertices(vec![0]),
            coverage_radius: 0,
            exclude_boundary: Some(true),
            ..Default::default()
        };
        let model = build_network_model(&m, &spec).unwrap();
        let sol = solve(&model, &SolveOptions::deterministic()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = grid(3, 2);
        let spec = FunctionalSpec {
            sinks: SinkSelection::Vertices(vec![1]),
            exclude_boundary: Some(false),
            lambda_distance: 0.5,
            ..Default::default()
        };
        let model = build_network_model(&m, &spec).unwrap();
        let a = solve(&model, &SolveOptions::deterministic()).unwrap();
        let b = solve(&model, &SolveOptions::default()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert!((a.objective.unwrap() - b.objective.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn node_limit_returns_incumbent_or_timeout() {
        let m = grid(3, 3);
        let spec = FunctionalSpec {
            sinks: SinkSelection::Vertices(vec![0]),
            exclude_boundary: Some(false),
            ..Default::default()
        };
        let model = build_network_model(&m, &spec).unwrap();
        let opts = SolveOptions {
            node_limit: Some(3),
            ..SolveOptions::deterministic()
        };
        let sol = solve(&model, &opts).unwrap();
        assert!(matches!(sol.status, SolveStatus::FeasibleIncumbent | SolveStatus::TimeoutNoIncumbent));
        assert!(sol.nodes <= 4);
    }
}
