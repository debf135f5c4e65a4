//! Simulated-annealing edge-edit search used as a comparison point for the
//! exact solver.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, Mesh};
use crate::model::{build_network_model, FunctionalSpec, IpModel};
use crate::solver::{evaluate_edge_set, solution_from_values, NetworkSolution, SolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    /// Temperature multiplier per iteration.
    pub cooling: f64,
    pub max_iterations: usize,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temperature: 1.0,
            cooling: 0.95,
            max_iterations: 200,
            time_limit: None,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return Err(Error::InvalidQuery("initial temperature must be positive".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidQuery("cooling factor must lie in (0, 1)".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidQuery("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    DeleteOne,
    DeletePair,
    DeleteTriple,
    AddOne,
}

/// One edit: which edges flip.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edit {
    pub kind: EditKind,
    pub edges: Vec<EdgeId>,
}

fn shares_vertex(mesh: &Mesh, a: EdgeId, b: EdgeId) -> Option<usize> {
    let (ea, eb) = (mesh.edge(a), mesh.edge(b));
    [ea.a, ea.b].into_iter().find(|&v| v == eb.a || v == eb.b)
}

/// All single deletions, adjacent-pair deletions, consecutive-triple
/// deletions and single additions from `current`, sorted and deduplicated.
pub fn candidate_edits(mesh: &Mesh, current: &BTreeSet<EdgeId>, addable: &BTreeSet<EdgeId>) -> Vec<Edit> {
    let mut out = BTreeSet::new();
    for &e in current {
        out.insert(Edit {
            kind: EditKind::DeleteOne,
            edges: vec![e],
        });
        let edge = mesh.edge(e);
        for v in [edge.a, edge.b] {
            for &f in mesh.vertex_edges(v) {
                if f == e || !current.contains(&f) {
                    continue;
                }
                let mut pair = vec![e, f];
                pair.sort_unstable();
                out.insert(Edit {
                    kind: EditKind::DeletePair,
                    edges: pair,
                });
                // extend the pair from f's far end
                let w = mesh.other_end(f, v);
                for &g in mesh.vertex_edges(w) {
                    if g == f || g == e || !current.contains(&g) {
                        continue;
                    }
                    if shares_vertex(mesh, g, e).is_some() && mesh.other_end(g, w) == mesh.other_end(e, v) {
                        continue;
                    }
                    let mut triple = vec![e, f, g];
                    triple.sort_unstable();
                    out.insert(Edit {
                        kind: EditKind::DeleteTriple,
                        edges: triple,
                    });
                }
            }
        }
    }
    for &e in addable {
        if !current.contains(&e) {
            out.insert(Edit {
                kind: EditKind::AddOne,
                edges: vec![e],
            });
        }
    }
    out.into_iter().collect()
}

fn apply(current: &BTreeSet<EdgeId>, edit: &Edit) -> BTreeSet<EdgeId> {
    let mut next = current.clone();
    for e in &edit.edges {
        if edit.kind == EditKind::AddOne {
            next.insert(*e);
        } else {
            next.remove(e);
        }
    }
    next
}

/// Outcome of one seeded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRun {
    pub seed: u64,
    pub iterations: usize,
    pub best: NetworkSolution,
    /// Edge sets visited, starting state first.
    pub trajectory: Vec<BTreeSet<EdgeId>>,
    pub wall_seconds: f64,
}

/// Runs one trajectory on an already built model.
pub fn search_model(model: &IpModel, mesh: &Mesh, schedule: &AnnealSchedule) -> Result<SearchRun> {
    schedule.validate()?;
    let lay = model
        .layout()
        .ok_or_else(|| Error::InvalidQuery("model has no network layout".into()))?;
    let start_time = Instant::now();
    let addable: BTreeSet<EdgeId> = (0..lay.edge_var.len())
        .filter(|&e| model.var(lay.edge_var[e]).upper > 0.5)
        .collect();
    let mut current = addable.clone();
    let start = evaluate_edge_set(model, &current)?;
    if !start.is_feasible() {
        return Err(Error::Infeasible(format!(
            "the all-edges start violates {}",
            start.violations.first().map(String::as_str).unwrap_or("a constraint")
        )));
    }
    let mut best = (start.objective, start.values);
    let mut trajectory = vec![current.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut temperature = schedule.initial_temperature;
    let mut iterations = 0;
    while iterations < schedule.max_iterations {
        if schedule
            .time_limit
            .is_some_and(|t| start_time.elapsed().as_secs_f64() > t)
        {
            break;
        }
        let mut options: Vec<(f64, BTreeSet<EdgeId>, Vec<f64>)> = Vec::new();
        for edit in candidate_edits(mesh, &current, &addable) {
            let next = apply(&current, &edit);
            let ev = evaluate_edge_set(model, &next)?;
            if ev.is_feasible() {
                options.push((ev.objective, next, ev.values));
            }
        }
        if options.is_empty() {
            break;
        }
        let low = options.iter().map(|o| o.0).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = options.iter().map(|o| (-(o.0 - low) / temperature).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = options.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        let (obj, next, values) = options.swap_remove(chosen);
        if obj < best.0 {
            best = (obj, values);
        }
        current = next;
        trajectory.push(current.clone());
        temperature *= schedule.cooling;
        iterations += 1;
    }
    let wall = start_time.elapsed().as_secs_f64();
    let solution = solution_from_values(model, SolveStatus::FeasibleIncumbent, best.1, best.0, 0.0, 0, wall, Vec::new());
    Ok(SearchRun {
        seed: schedule.seed,
        iterations,
        best: solution,
        trajectory,
        wall_seconds: wall,
    })
}

/// Single trajectory from the all-active network, returning the best state seen.
pub fn stochastic_search(mesh: &Mesh, spec: &FunctionalSpec, schedule: &AnnealSchedule) -> Result<NetworkSolution> {
    let model = build_network_model(mesh, spec)?;
    Ok(search_model(&model, mesh, schedule)?.best)
}

/// Independent restarts with the given seeds, run in parallel. Results keep
/// the order of `seeds`.
pub fn run_restarts(mesh: &Mesh, spec: &FunctionalSpec, schedule: &AnnealSchedule, seeds: &[u64]) -> Result<Vec<SearchRun>> {
    let model = build_network_model(mesh, spec)?;
    let jobs: Vec<u64> = seeds.to_vec();
    crate::par::map(jobs, true, |seed| {
        let s = AnnealSchedule {
            seed,
            ..schedule.clone()
        };
        search_model(&model, mesh, &s)
    })
    .into_iter()
    .collect()
}

/// `seed,iterations,objective,wall_seconds` per run, then an optional
/// `exact` line with the solver's objective.
pub fn comparison_csv(runs: &[SearchRun], exact: Option<(f64, f64)>) -> String {
    let mut out = String::from("seed,iterations,objective,wall_seconds\n");
    for r in runs {
        let obj = r.best.objective.unwrap_or(f64::NAN);
        let _ = writeln!(out, "{},{},{},{:.6}", r.seed, r.iterations, obj, r.wall_seconds);
    }
    if let Some((obj, secs)) = exact {
        let _ = writeln!(out, "exact,,{},{:.6}", obj, secs);
    }
    out
}
