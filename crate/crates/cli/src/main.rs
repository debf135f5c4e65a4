use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use netsynth::baseline::{comparison_csv, run_restarts, AnnealSchedule};
use netsynth::mesh::{load_mesh, Mesh};
use netsynth::model::{FunctionalSpec, ScenarioMode};
use netsynth::pipeline::{
    render_svg, run_scenario, run_street_pipeline, scenario_artifacts, street_artifacts, validate_solution, LevelPlan,
    RenderExtras, RenderLayer, RenderStyle, SolutionDocument, TilingCheck,
};
use netsynth::smoothing::{apply_to_positions, extract_snakes, smooth, snap_right_angles, SnakeWeights, StepPolicy};
use netsynth::solver::{export_lp, solve, SolveOptions};
use netsynth::tiling::{parse_templates, RoomTemplate, TilingMode};

#[derive(Parser)]
#[command(name = "netsynth", version, about = "Network synthesis on polygonal meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a network spec, or run a multi-level street plan with --plan.
    Generate(GenerateArgs),
    /// Solve a floorplan or game-level spec with room templates.
    Tile(TileArgs),
    /// Smooth the network of a solution document with snakes.
    Smooth(SmoothArgs),
    /// Write the integer program in LP format.
    ExportLp(ModelArgs),
    /// Draw one or more solution documents.
    Render(RenderArgs),
    /// Compare seeded stochastic search against the exact solver.
    CompareBaseline(BaselineArgs),
    /// Re-check a solution document from scratch.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverKind {
    Builtin,
    Export,
}

#[derive(Args)]
struct SolveFlags {
    /// Seconds before the best incumbent is returned.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Single-threaded search with reproducible results.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value = "builtin")]
    solver: SolverKind,
    /// Seed for vertex sampling in point-to-point specs.
    #[arg(long)]
    seed: Option<u64>,
}

impl SolveFlags {
    fn options(&self) -> Result<SolveOptions> {
        let opts = SolveOptions {
            time_limit: self.time_limit,
            deterministic: self.deterministic,
            ..Default::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, required_unless_present = "plan", conflicts_with = "plan")]
    spec: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
}

#[derive(Args)]
struct TileArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    templates: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    solve: SolveFlags,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Midpoint subdivisions per snake.
    #[arg(long, default_value_t = 2)]
    subdivisions: usize,
    /// Snap junction arms within this many degrees of a right angle.
    #[arg(long)]
    snap: Option<f64>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Solution documents, coarsest level first.
    #[arg(long, num_args = 1.., required = true)]
    solution: Vec<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 800.0)]
    width: f64,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// First seed; runs use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    runs: u64,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Exact-solver time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_mesh(path: &Path) -> Result<Mesh> {
    load_mesh(&read(path)?).with_context(|| format!("loading mesh {}", path.display()))
}

fn read_spec(path: &Path, seed: Option<u64>) -> Result<FunctionalSpec> {
    let mut spec = FunctionalSpec::from_toml(&read(path)?).with_context(|| format!("loading spec {}", path.display()))?;
    if let Some(s) = seed {
        spec.point_to_point.seed = s;
    }
    Ok(spec)
}

fn read_templates(path: Option<&Path>) -> Result<Vec<RoomTemplate>> {
    match path {
        Some(p) => parse_templates(&read(p)?).with_context(|| format!("loading templates {}", p.display())),
        None => Ok(Vec::new()),
    }
}

fn read_document(path: &Path) -> Result<SolutionDocument> {
    SolutionDocument::parse(&read(path)?).with_context(|| format!("loading solution {}", path.display()))
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn tiling_mode(mode: ScenarioMode) -> Option<TilingMode> {
    match mode {
        ScenarioMode::Network => None,
        ScenarioMode::Floorplan => Some(TilingMode::Floorplan),
        ScenarioMode::Gamelevel => Some(TilingMode::Gamelevel),
    }
}

/// Solves one scenario and writes its artifacts. Returns whether a solution
/// was found.
fn scenario(mesh: &Mesh, spec: &FunctionalSpec, templates: &[RoomTemplate], flags: &SolveFlags, out: &Path) -> Result<bool> {
    if flags.solver == SolverKind::Export {
        let (model, _) = netsynth::pipeline::build_scenario_model(mesh, spec, templates)?;
        write_files(out, &[("model.lp".into(), export_lp(&model)?)])?;
        return Ok(true);
    }
    let outcome = run_scenario(mesh, spec, templates, &flags.options()?)?;
    let sol = &outcome.solution;
    eprintln!(
        "status {:?}, objective {}, bound {}, {} nodes, {:.3}s",
        sol.status,
        sol.objective.map_or("-".into(), |o| o.to_string()),
        sol.bound,
        sol.nodes,
        sol.elapsed_seconds
    );
    write_files(out, &scenario_artifacts(mesh, spec, templates, &outcome, &RenderStyle::default())?)?;
    Ok(sol.status.has_solution())
}

fn generate(args: &GenerateArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    if let Some(plan_path) = &args.plan {
        let plan = LevelPlan::from_toml(&read(plan_path)?).with_context(|| format!("loading plan {}", plan_path.display()))?;
        if args.solve.solver == SolverKind::Export {
            bail!("--solver export needs every level solved; export single levels with export-lp");
        }
        let outcome = run_street_pipeline(&mesh, &plan, &args.solve.options()?)?;
        for (i, l) in outcome.levels.iter().enumerate() {
            eprintln!(
                "level {i}: status {:?}, objective {}, {} edges",
                l.solution.status,
                l.solution.objective.map_or("-".into(), |o| o.to_string()),
                l.solution.active_edges.len()
            );
        }
        write_files(&args.out_dir, &street_artifacts(&outcome, &RenderStyle::default())?)?;
        return Ok(true);
    }
    let spec = read_spec(args.spec.as_deref().expect("clap enforces --spec"), args.solve.seed)?;
    if spec.mode != ScenarioMode::Network {
        bail!("spec mode is {:?}; use the tile subcommand", spec.mode);
    }
    scenario(&mesh, &spec, &[], &args.solve, &args.out_dir)
}

fn tile(args: &TileArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let spec = read_spec(&args.spec, args.solve.seed)?;
    if spec.mode == ScenarioMode::Network {
        bail!("tile needs a floorplan or gamelevel spec");
    }
    let templates = read_templates(Some(&args.templates))?;
    scenario(&mesh, &spec, &templates, &args.solve, &args.out_dir)
}

fn smooth_cmd(args: &SmoothArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let doc = read_document(&args.solution)?;
    let active: BTreeSet<_> = doc.edge_set(&mesh)?;
    let snakes = extract_snakes(&mesh, &active, SnakeWeights::TOP, args.subdivisions)?;
    let report = smooth(&snakes, &StepPolicy::default());
    let mut result = report.snakes;
    if let Some(deg) = args.snap {
        snap_right_angles(&mut result, deg);
    }
    eprintln!(
        "{} snakes, {} iterations, energy {} -> {}",
        result.len(),
        report.iterations,
        report.energies.first().copied().unwrap_or(0.0),
        report.energies.last().copied().unwrap_or(0.0)
    );
    let mut positions = mesh.positions().to_vec();
    apply_to_positions(&result, &mut positions);
    let mut mdoc = mesh.to_document();
    for (v, p) in mdoc.vertices.iter_mut().zip(&positions) {
        v.x = p[0];
        v.y = p[1];
    }
    let layer = RenderLayer::from_document(&mesh, &doc, 0)?;
    let extras = RenderExtras {
        polylines: result.iter().map(|s| s.points.clone()).collect(),
        sinks: doc.sinks.clone(),
        ..Default::default()
    };
    let svg = render_svg(&mesh, &[layer], &extras, &RenderStyle::default());
    write_files(
        &args.out_dir,
        &[("smoothed-mesh.json".into(), mdoc.to_json()), ("smoothed.svg".into(), svg)],
    )?;
    Ok(true)
}

fn export(args: &ModelArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let spec = read_spec(&args.spec, args.seed)?;
    let templates = read_templates(args.templates.as_deref())?;
    let (model, _) = netsynth::pipeline::build_scenario_model(&mesh, &spec, &templates)?;
    write_files(&args.out_dir, &[("model.lp".into(), export_lp(&model)?)])?;
    Ok(true)
}

fn render(args: &RenderArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let mut layers = Vec::new();
    let mut extras = RenderExtras::default();
    for (i, path) in args.solution.iter().enumerate() {
        let doc = read_document(path)?;
        layers.push(RenderLayer::from_document(&mesh, &doc, doc.level.unwrap_or(i))?);
        extras.rooms.extend(doc.placements.iter().map(|p| (p.faces.clone(), p.template)));
        if i == 0 {
            extras.sinks = doc.sinks.clone();
        }
    }
    if let Some(t) = &args.templates {
        let n = read_templates(Some(t))?.len();
        if let Some((_, bad)) = extras.rooms.iter().find(|(_, t)| *t >= n) {
            bail!("solution uses template {bad} but the catalogue has {n}");
        }
    }
    let style = RenderStyle {
        width: args.width,
        ..Default::default()
    };
    write_files(&args.out_dir, &[("render.svg".into(), render_svg(&mesh, &layers, &extras, &style))])?;
    Ok(true)
}

fn compare(args: &BaselineArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let spec = read_spec(&args.spec, None)?;
    if spec.mode != ScenarioMode::Network {
        bail!("compare-baseline supports network specs only");
    }
    let model = netsynth::model::build_network_model(&mesh, &spec)?;
    let started = Instant::now();
    let exact = solve(
        &model,
        &SolveOptions {
            time_limit: args.time_limit,
            deterministic: args.deterministic,
            ..Default::default()
        },
    )?;
    let exact_secs = started.elapsed().as_secs_f64();
    let schedule = AnnealSchedule {
        max_iterations: args.iterations,
        ..Default::default()
    };
    let seeds: Vec<u64> = (args.seed..args.seed + args.runs).collect();
    let runs = run_restarts(&mesh, &spec, &schedule, &seeds)?;
    let best = runs
        .iter()
        .filter_map(|r| r.best.objective)
        .fold(f64::INFINITY, f64::min);
    eprintln!(
        "exact {:?} {}, best stochastic {best}",
        exact.status,
        exact.objective.map_or("-".into(), |o| o.to_string())
    );
    let csv = comparison_csv(&runs, exact.objective.map(|o| (o, exact_secs)));
    write_files(&args.out_dir, &[("comparison.csv".into(), csv)])?;
    Ok(exact.status.has_solution())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let mesh = read_mesh(&args.mesh)?;
    let spec = read_spec(&args.spec, None)?;
    let doc = read_document(&args.solution)?;
    let templates = read_templates(args.templates.as_deref())?;
    let check = match tiling_mode(spec.mode) {
        Some(mode) if !templates.is_empty() => Some(TilingCheck {
            mode,
            templates: &templates,
        }),
        Some(_) => bail!("validating a {:?} solution needs --templates", spec.mode),
        None => None,
    };
    let report = validate_solution(&mesh, &spec, &doc, check)?;
    let text = report.to_text();
    print!("{text}");
    write_files(&args.out_dir, &[("validation.txt".into(), text)])?;
    Ok(report.is_valid())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Tile(a) => tile(a),
        Command::Smooth(a) => smooth_cmd(a),
        Command::ExportLp(a) => export(a),
        Command::Render(a) => render(a),
        Command::CompareBaseline(a) => compare(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("no feasible result");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
