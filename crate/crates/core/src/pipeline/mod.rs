//! Scenario orchestration: multi-level street generation, floorplan and game
//! level solves, documents, rendering and validation.

mod document;
mod render;
mod validate;

pub use document::{HalfEdgeEntry, PlacementEntry, SolutionDocument, SOLUTION_DOCUMENT_VERSION};
pub use render::{ramp, render_svg, RenderExtras, RenderLayer, RenderStyle};
pub use validate::{scan_features, validate_solution, FeatureScan, TilingCheck, ValidationReport};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{catmull_clark_subdivide, EdgeId, Mesh, Point, Subdivision, VertexId};
use crate::model::{build_network_model, FunctionalSpec, IpModel, NetworkContext, ScenarioMode, SinkSelection};
use crate::smoothing::{apply_to_positions, extract_snakes, smooth, snap_right_angles, subdivide_snake, Snake, SnakeWeights, StepPolicy};
use crate::solver::{export_lp, solve, NetworkSolution, SolveOptions};
use crate::tiling::{
    build_room_count_constraints, build_tiling_constraints, enumerate_placements, grid_map, RoomPlacement, RoomTemplate,
    TilingMode,
};

/// Where a level's sinks come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkRule {
    /// Use the level spec's own sink selection.
    #[default]
    Explicit,
    /// Every vertex of the previous level's network.
    ParentNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDescriptor {
    #[serde(default)]
    pub spec: FunctionalSpec,
    /// Subdivide the mesh before solving this level.
    #[serde(default)]
    pub subdivide: bool,
    #[serde(default)]
    pub sinks: SinkRule,
    /// Snake weights; defaults interpolate from the top to the bottom level.
    #[serde(default)]
    pub weights: Option<SnakeWeights>,
}

fn default_subdivisions() -> usize {
    2
}

fn default_snap() -> Option<f64> {
    Some(15.0)
}

/// Ordered street levels, coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelPlan {
    pub level: Vec<LevelDescriptor>,
    /// Levels smoothed together; defaults to one group per level except the
    /// last two, which share a pass.
    #[serde(default)]
    pub smoothing_groups: Option<Vec<Vec<usize>>>,
    /// Midpoint subdivisions applied to each snake.
    #[serde(default = "default_subdivisions")]
    pub snake_subdivisions: usize,
    /// Junction arms within this many degrees of a right angle are snapped.
    #[serde(default = "default_snap")]
    pub snap_degrees: Option<f64>,
    #[serde(default)]
    pub smoothing: StepPolicy,
}

impl LevelPlan {
    pub fn new(levels: Vec<LevelDescriptor>) -> LevelPlan {
        LevelPlan {
            level: levels,
            smoothing_groups: None,
            snake_subdivisions: default_subdivisions(),
            snap_degrees: default_snap(),
            smoothing: StepPolicy::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<LevelPlan> {
        let plan: LevelPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.level.is_empty() {
            return Err(Error::InvalidSpec("a plan needs at least one level".into()));
        }
        if self.level[0].sinks == SinkRule::ParentNetwork {
            return Err(Error::InvalidSpec("the first level has no parent network".into()));
        }
        for (i, w) in self.level.windows(2).enumerate() {
            if w[1].spec.coverage_radius > w[0].spec.coverage_radius {
                return Err(Error::InvalidSpec(format!(
                    "coverage radius grows from level {} to level {}",
                    i,
                    i + 1
                )));
            }
        }
        for (i, l) in self.level.iter().enumerate() {
            if l.spec.mode != ScenarioMode::Network {
                return Err(Error::InvalidSpec(format!("level {i} is not a network level")));
            }
            l.spec.validate().map_err(|e| e.at_level(i))?;
            if let Some(w) = l.weights {
                w.validate().map_err(|e| e.at_level(i))?;
            }
        }
        let mut seen = BTreeSet::new();
        for &i in self.groups().iter().flatten() {
            if i >= self.level.len() || !seen.insert(i) {
                return Err(Error::InvalidSpec(format!("smoothing groups use level {i} badly")));
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        if let Some(g) = &self.smoothing_groups {
            return g.clone();
        }
        let n = self.level.len();
        if n <= 2 {
            return vec![(0..n).collect()];
        }
        let mut g: Vec<Vec<usize>> = (0..n - 2).map(|i| vec![i]).collect();
        g.push(vec![n - 2, n - 1]);
        g
    }

    fn weights(&self, level: usize) -> SnakeWeights {
        self.level[level]
            .weights
            .unwrap_or_else(|| SnakeWeights::for_level(level, self.level.len()))
    }
}

/// Everything produced for one level.
#[derive(Debug, Clone)]
pub struct LevelOutcome {
    pub mesh: Mesh,
    /// The level's spec with its sinks resolved.
    pub spec: FunctionalSpec,
    pub model: IpModel,
    pub solution: NetworkSolution,
    pub document: SolutionDocument,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub levels: Vec<LevelOutcome>,
    /// Each level's active edges on the final mesh.
    pub final_edges: Vec<BTreeSet<EdgeId>>,
    /// Smoothed snakes with their group index.
    pub snakes: Vec<(usize, Snake)>,
    /// Final mesh positions after smoothing.
    pub positions: Vec<Point>,
}

impl PipelineOutcome {
    pub fn final_mesh(&self) -> &Mesh {
        &self.levels.last().expect("at least one level").mesh
    }

    /// Final-mesh layers for rendering, with each level's distance values
    /// where the level lives on the final mesh.
    pub fn render_layers(&self) -> Result<Vec<RenderLayer>> {
        let last = self.levels.len() - 1;
        let mesh = self.final_mesh();
        let mut out = Vec::new();
        for (i, edges) in self.final_edges.iter().enumerate() {
            let half_edges = if i == last {
                self.levels[i].document.oriented(mesh)?
            } else {
                Vec::new()
            };
            out.push(RenderLayer {
                level: i,
                active: edges.clone(),
                half_edges,
            });
        }
        Ok(out)
    }
}

/// Solves a mesh with one spec, mapping infeasibility to an error.
fn solve_level(mesh: &Mesh, spec: &FunctionalSpec, options: &SolveOptions, level: usize) -> Result<LevelOutcome> {
    let model = build_network_model(mesh, spec).map_err(|e| e.at_stage("model").at_level(level))?;
    let solution = solve(&model, options).map_err(|e| e.at_stage("solve").at_level(level))?;
    if !solution.status.has_solution() {
        return Err(Error::Infeasible(format!("solver status {:?}", solution.status)).at_level(level));
    }
    let sinks = NetworkContext::new(mesh, spec)?.sinks;
    let document = SolutionDocument::from_solution(mesh, &solution, &sinks, spec.mode, Some(level), &[]);
    Ok(LevelOutcome {
        mesh: mesh.clone(),
        spec: spec.clone(),
        model,
        solution,
        document,
    })
}

/// Level-by-level street generation. Each level may subdivide the previous
/// mesh; the previous network is carried over as fixed-active edges and can
/// serve as the sink set. After all levels, each smoothing group is smoothed
/// in plan order on the final mesh.
pub fn run_street_pipeline(mesh: &Mesh, plan: &LevelPlan, options: &SolveOptions) -> Result<PipelineOutcome> {
    plan.validate()?;
    let mut levels: Vec<LevelOutcome> = Vec::new();
    let mut subdivisions: Vec<Option<Subdivision>> = Vec::new();
    let mut current = mesh.clone();
    let mut parent_edges: BTreeSet<EdgeId> = BTreeSet::new();
    for (i, desc) in plan.level.iter().enumerate() {
        if desc.subdivide {
            let sub = catmull_clark_subdivide(&current).map_err(|e| e.at_stage("subdivide").at_level(i))?;
            parent_edges = sub.map_edges(parent_edges.iter().copied());
            current = sub.mesh.clone();
            subdivisions.push(Some(sub));
        } else {
            subdivisions.push(None);
        }
        if i > 0 {
            let mut ann = current.annotations().clone();
            ann.fixed_active.extend(parent_edges.iter().copied());
            for e in &parent_edges {
                ann.fixed_inactive.remove(e);
            }
            current = current.with_annotations(ann).map_err(|e| e.at_level(i))?;
        }
        let mut spec = desc.spec.clone();
        if desc.sinks == SinkRule::ParentNetwork {
            let verts: BTreeSet<VertexId> = parent_edges
                .iter()
                .flat_map(|&e| [current.edge(e).a, current.edge(e).b])
                .collect();
            if verts.is_empty() {
                return Err(Error::InvalidNetwork("parent network is empty".into()).at_level(i));
            }
            spec.sinks = SinkSelection::Vertices(verts.into_iter().collect());
        }
        let outcome = solve_level(&current, &spec, options, i)?;
        parent_edges = outcome.solution.active_edges.clone();
        levels.push(outcome);
    }

    let n = levels.len();
    let mut final_edges = Vec::with_capacity(n);
    for i in 0..n {
        let mut edges = levels[i].solution.active_edges.clone();
        for sub in subdivisions[i + 1..].iter().flatten() {
            edges = sub.map_edges(edges.iter().copied());
        }
        final_edges.push(edges);
    }

    let final_mesh = levels[n - 1].mesh.clone();
    let mut positions = final_mesh.positions().to_vec();
    let mut snakes = Vec::new();
    for (g, group) in plan.groups().iter().enumerate() {
        let mut edges: BTreeSet<EdgeId> = BTreeSet::new();
        for &i in group {
            let earlier: BTreeSet<EdgeId> = if i == 0 { BTreeSet::new() } else { final_edges[i - 1].clone() };
            edges.extend(final_edges[i].difference(&earlier).copied());
        }
        if edges.is_empty() {
            continue;
        }
        let top = *group.iter().min().expect("non-empty group");
        let raw = extract_snakes(&final_mesh, &edges, plan.weights(top), 0).map_err(|e| e.at_stage("smooth"))?;
        let prepared: Vec<Snake> = raw
            .into_iter()
            .map(|mut s| {
                for (k, v) in s.vertices.iter().enumerate() {
                    let p = positions[v.expect("control points are mesh vertices")];
                    s.points[k] = p;
                    s.original[k] = p;
                }
                subdivide_snake(&s, plan.snake_subdivisions)
            })
            .collect();
        let mut result = smooth(&prepared, &plan.smoothing).snakes;
        if let Some(deg) = plan.snap_degrees {
            snap_right_angles(&mut result, deg);
        }
        apply_to_positions(&result, &mut positions);
        snakes.extend(result.into_iter().map(|s| (g, s)));
    }

    Ok(PipelineOutcome {
        levels,
        final_edges,
        snakes,
        positions,
    })
}

/// Named output files of a pipeline run: per level the solution document,
/// the LP export and the validation report, then the final mesh with smoothed
/// positions and the SVG.
pub fn street_artifacts(outcome: &PipelineOutcome, style: &RenderStyle) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for (i, level) in outcome.levels.iter().enumerate() {
        files.push((format!("level-{i}.solution.json"), level.document.to_json()));
        files.push((format!("level-{i}.lp"), export_lp(&level.model)?));
        let report = validate_solution(&level.mesh, &level.spec, &level.document, None)?;
        files.push((format!("level-{i}.validation.txt"), report.to_text()));
    }
    let mesh = outcome.final_mesh();
    let mut doc = mesh.to_document();
    for (v, p) in doc.vertices.iter_mut().zip(&outcome.positions) {
        v.x = p[0];
        v.y = p[1];
    }
    files.push(("smoothed-mesh.json".into(), doc.to_json()));
    let extras = RenderExtras {
        polylines: outcome.snakes.iter().map(|(_, s)| s.points.clone()).collect(),
        sinks: outcome.levels[0].document.sinks.clone(),
        ..Default::default()
    };
    files.push(("streets.svg".into(), render_svg(mesh, &outcome.render_layers()?, &extras, style)));
    Ok(files)
}

/// Result of a single-solve scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub model: IpModel,
    pub solution: NetworkSolution,
    pub placements: Vec<RoomPlacement>,
    pub document: Option<SolutionDocument>,
    pub report: Option<ValidationReport>,
}

/// Builds the model for `spec.mode` (rooms are needed for floorplans and
/// game levels). Returns the model and the room placements.
pub fn build_scenario_model(
    mesh: &Mesh,
    spec: &FunctionalSpec,
    templates: &[RoomTemplate],
) -> Result<(IpModel, Vec<RoomPlacement>)> {
    let mut model = build_network_model(mesh, spec).map_err(|e| e.at_stage("model"))?;
    let mode = match spec.mode {
        ScenarioMode::Network => return Ok((model, Vec::new())),
        ScenarioMode::Floorplan => TilingMode::Floorplan,
        ScenarioMode::Gamelevel => TilingMode::Gamelevel,
    };
    if templates.is_empty() {
        return Err(Error::InvalidSpec("room templates are required for this mode".into()).at_stage("tiling"));
    }
    let mut placements = enumerate_placements(mesh, templates).map_err(|e| e.at_stage("tiling"))?;
    build_tiling_constraints(mesh, &mut placements, mode, &mut model).map_err(|e| e.at_stage("tiling"))?;
    build_room_count_constraints(&placements, templates, &mut model).map_err(|e| e.at_stage("tiling"))?;
    Ok((model, placements))
}

fn tiling_mode(mode: ScenarioMode) -> Option<TilingMode> {
    match mode {
        ScenarioMode::Network => None,
        ScenarioMode::Floorplan => Some(TilingMode::Floorplan),
        ScenarioMode::Gamelevel => Some(TilingMode::Gamelevel),
    }
}

/// Builds, solves and validates one scenario. An infeasible or timed-out
/// solve is reported through the solution status, not as an error.
pub fn run_scenario(
    mesh: &Mesh,
    spec: &FunctionalSpec,
    templates: &[RoomTemplate],
    options: &SolveOptions,
) -> Result<ScenarioOutcome> {
    let (model, placements) = build_scenario_model(mesh, spec, templates)?;
    let solution = solve(&model, options).map_err(|e| e.at_stage("solve"))?;
    let (document, report) = if solution.status.has_solution() {
        let sinks = NetworkContext::new(mesh, spec)?.sinks;
        let doc = SolutionDocument::from_solution(mesh, &solution, &sinks, spec.mode, None, &placements);
        let check = tiling_mode(spec.mode).map(|mode| TilingCheck { mode, templates });
        let report = validate_solution(mesh, spec, &doc, check).map_err(|e| e.at_stage("validate"))?;
        (Some(doc), Some(report))
    } else {
        (None, None)
    };
    Ok(ScenarioOutcome {
        model,
        solution,
        placements,
        document,
        report,
    })
}

/// Render extras for a scenario: rooms, sinks and sampled vertices.
pub fn scenario_extras(mesh: &Mesh, spec: &FunctionalSpec, outcome: &ScenarioOutcome) -> Result<RenderExtras> {
    let ctx = NetworkContext::new(mesh, spec)?;
    let rooms = outcome
        .solution
        .placements
        .iter()
        .map(|&x| (outcome.placements[x].faces.clone(), outcome.placements[x].template))
        .collect();
    let samples = if spec.point_to_point.enabled {
        crate::mesh::sample_partition_vertices(mesh, spec.point_to_point.seed)?
            .into_values()
            .collect()
    } else {
        Vec::new()
    };
    Ok(RenderExtras {
        rooms,
        polylines: Vec::new(),
        sinks: ctx.sinks.into_iter().collect(),
        samples,
    })
}

/// Named output files of a scenario run. Without a solution only the LP
/// export is produced.
pub fn scenario_artifacts(
    mesh: &Mesh,
    spec: &FunctionalSpec,
    templates: &[RoomTemplate],
    outcome: &ScenarioOutcome,
    style: &RenderStyle,
) -> Result<Vec<(String, String)>> {
    let mut files = vec![("model.lp".to_string(), export_lp(&outcome.model)?)];
    let (Some(doc), Some(report)) = (&outcome.document, &outcome.report) else {
        return Ok(files);
    };
    files.push(("solution.json".into(), doc.to_json()));
    files.push(("validation.txt".into(), report.to_text()));
    if spec.mode != ScenarioMode::Network {
        let map = grid_map(
            mesh,
            &outcome.placements,
            &outcome.solution.placements,
            templates,
            &outcome.solution.active_edges,
        )?;
        files.push(("gridmap.txt".into(), map));
    }
    let layer = RenderLayer::from_document(mesh, doc, 0)?;
    let extras = scenario_extras(mesh, spec, outcome)?;
    files.push(("network.svg".into(), render_svg(mesh, &[layer], &extras, style)));
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;
    use crate::model::Policy;

    fn level(radius: usize, subdivide: bool, sinks: SinkRule) -> LevelDescriptor {
        LevelDescriptor {
            spec: FunctionalSpec {
                coverage_radius: radius,
                sinks: SinkSelection::Vertices(vec![0]),
                exclude_boundary: Some(false),
                ..Default::default()
            },
            subdivide,
            sinks,
            weights: None,
        }
    }

    #[test]
    fn one_level_equals_direct_solve() {
        let m = grid(2, 2);
        let plan = LevelPlan::new(vec![level(1, false, SinkRule::Explicit)]);
        let out = run_street_pipeline(&m, &plan, &SolveOptions::deterministic()).unwrap();
        let direct = solve(&build_network_model(&m, &plan.level[0].spec).unwrap(), &SolveOptions::deterministic()).unwrap();
        assert_eq!(out.levels[0].solution.objective, direct.objective);
        assert_eq!(out.levels[0].solution.active_edges, direct.active_edges);
    }

    #[test]
    fn parent_edges_stay_active() {
        let m = grid(2, 2);
        let plan = LevelPlan::new(vec![level(2, false, SinkRule::Explicit), level(1, true, SinkRule::ParentNetwork)]);
        let out = run_street_pipeline(&m, &plan, &SolveOptions::deterministic()).unwrap();
        assert!(out.final_edges[0].is_subset(&out.final_edges[1]));
        assert!(!out.snakes.is_empty());
    }

    #[test]
    fn plan_validation() {
        let mut plan = LevelPlan::new(vec![level(1, false, SinkRule::Explicit), level(2, false, SinkRule::Explicit)]);
        assert!(plan.validate().is_err());
        plan.level.swap(0, 1);
        plan.validate().unwrap();
        plan.level[0].sinks = SinkRule::ParentNetwork;
        assert!(plan.validate().is_err());
        assert_eq!(
            LevelPlan::new(vec![level(3, false, SinkRule::Explicit); 3]).groups(),
            vec![vec![0], vec![1, 2]]
        );
    }

    #[test]
    fn floorplan_rooms_partition_the_grid() {
        let m = grid(2, 2);
        let spec = FunctionalSpec {
            mode: ScenarioMode::Floorplan,
            sinks: SinkSelection::Vertices(vec![1]),
            dead_ends: Policy::Allowed,
            ..Default::default()
        };
        let templates = [RoomTemplate::rect("single", 1, 1)];
        let out = run_scenario(&m, &spec, &templates, &SolveOptions::deterministic()).unwrap();
        assert!(out.solution.status.has_solution());
        assert_eq!(out.solution.placements.len(), 4);
        let rep = out.report.unwrap();
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }
}
