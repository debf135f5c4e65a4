mod common;

use std::collections::BTreeSet;

use common::*;
use netsynth::mesh::{EdgeId, Mesh, VertexId};
use netsynth::model::{build_network_model, Fixings, FunctionalSpec, Policy, ScenarioMode, SinkSelection};
use netsynth::pipeline::{run_scenario, run_street_pipeline, LevelDescriptor, LevelPlan, SinkRule};
use netsynth::solver::{solve, SolveOptions};

fn touched(mesh: &Mesh, active: &BTreeSet<EdgeId>) -> BTreeSet<VertexId> {
    active.iter().flat_map(|&e| [mesh.edge(e).a, mesh.edge(e).b]).collect()
}

fn components(mesh: &Mesh, active: &BTreeSet<EdgeId>) -> usize {
    let verts = touched(mesh, active);
    verts
        .iter()
        .map(|&v| islands(mesh, active, &BTreeSet::from([v])).len())
        .max()
        .map_or(0, |n| n + 1)
}

#[test]
fn one_level_plan_matches_a_direct_solve() {
    let c = case("n02_grid3x3_corner");
    let plan = LevelPlan::new(vec![LevelDescriptor {
        spec: c.spec.clone(),
        subdivide: false,
        sinks: SinkRule::Explicit,
        weights: None,
    }]);
    let opts = SolveOptions::deterministic();
    let out = run_street_pipeline(&c.mesh, &plan, &opts).unwrap();
    let direct = solve(&build_network_model(&c.mesh, &c.spec).unwrap(), &opts).unwrap();
    assert_eq!(out.levels.len(), 1);
    assert_eq!(out.levels[0].solution.active_edges, direct.active_edges);
    assert_eq!(out.levels[0].solution.objective, direct.objective);
}

#[test]
fn street_levels_nest_and_keep_dead_ends_to_the_last_level() {
    let (mesh, plan) = street();
    let out = run_street_pipeline(&mesh, &plan, &SolveOptions::deterministic()).unwrap();
    assert_eq!(out.levels.len(), 3);
    for w in out.final_edges.windows(2) {
        assert!(w[0].is_subset(&w[1]));
    }
    for (i, level) in out.levels.iter().enumerate() {
        let f = features(&level.mesh, &level.spec, &level.solution.active_edges);
        if level.spec.dead_ends == Policy::Forbidden {
            assert_eq!(f.dead_ends, 0, "level {i}");
        }
        let s = sinks(&level.mesh, &level.spec);
        assert!(sink_connected(&level.mesh, &level.solution.active_edges, &s), "level {i}");
    }
    assert!(plan.level[..2].iter().all(|l| l.spec.dead_ends == Policy::Forbidden));
    assert_eq!(plan.level[2].spec.dead_ends, Policy::Allowed);
}

#[test]
fn child_sinks_are_the_parent_network() {
    let (mesh, plan) = street();
    let out = run_street_pipeline(&mesh, &plan, &SolveOptions::deterministic()).unwrap();
    for i in 1..out.levels.len() {
        let level = &out.levels[i];
        let parent: BTreeSet<EdgeId> = if plan.level[i].subdivide {
            netsynth::mesh::catmull_clark_subdivide(&out.levels[i - 1].mesh)
                .unwrap()
                .map_edges(out.levels[i - 1].solution.active_edges.iter().copied())
        } else {
            out.levels[i - 1].solution.active_edges.clone()
        };
        assert_eq!(sinks(&level.mesh, &level.spec), touched(&level.mesh, &parent));
        assert!(parent.is_subset(&level.solution.active_edges));
    }
}

fn game(sinks: Vec<VertexId>) -> (Mesh, FunctionalSpec, Vec<netsynth::tiling::RoomTemplate>) {
    let c = case("t02_game4x4");
    let spec = FunctionalSpec {
        mode: ScenarioMode::Gamelevel,
        branches: Policy::Forbidden,
        sinks: SinkSelection::Vertices(sinks),
        ..Default::default()
    };
    (c.mesh, spec, c.templates)
}

#[test]
fn gamelevel_with_one_sink_is_circular() {
    let (mesh, mut spec, templates) = game(vec![7]);
    spec.dead_ends = Policy::Forbidden;
    let out = run_scenario(&mesh, &spec, &templates, &SolveOptions::deterministic()).unwrap();
    assert!(out.solution.status.has_solution());
    let active = &out.solution.active_edges;
    let verts = touched(&mesh, active);
    assert!(verts.iter().all(|&v| degree(&mesh, active, v) == 2), "every visited vertex lies on the loop");
    assert_eq!(components(&mesh, active), 1);
    assert_eq!(active.len(), verts.len());
}

#[test]
fn gamelevel_with_two_sinks_is_linear() {
    let (mesh, spec, templates) = game(vec![1, 23]);
    let out = run_scenario(&mesh, &spec, &templates, &SolveOptions::deterministic()).unwrap();
    assert!(out.solution.status.has_solution());
    let active = &out.solution.active_edges;
    let verts = touched(&mesh, active);
    assert!(verts.iter().all(|&v| degree(&mesh, active, v) <= 2));
    let ends: Vec<_> = verts.iter().filter(|&&v| degree(&mesh, active, v) == 1).collect();
    assert!(ends.len() <= 2 * components(&mesh, active));
    assert!(sink_connected(&mesh, active, &BTreeSet::from([1, 23])));
}

#[test]
fn floorplan_passes_through_every_elevator() {
    let c = case("t01_floor4x4");
    let elevators = vec![7, 11, 13, 17];
    let spec = FunctionalSpec {
        sinks: SinkSelection::Vertices(elevators.clone()),
        fixings: Fixings {
            active_vertices: elevators.clone(),
            ..Default::default()
        },
        ..c.spec.clone()
    };
    let out = run_scenario(&c.mesh, &spec, &c.templates, &SolveOptions::deterministic()).unwrap();
    assert!(out.solution.status.has_solution());
    let verts = touched(&c.mesh, &out.solution.active_edges);
    for v in elevators {
        assert!(verts.contains(&v), "elevator {v} not visited");
    }
}
