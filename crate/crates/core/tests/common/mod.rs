//! Fixture loading and solver-independent reference computations.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use netsynth::mesh::{load_mesh, EdgeId, HalfEdgeId, Mesh, VertexId};
use netsynth::model::{FunctionalSpec, Policy, SinkSelection};
use netsynth::pipeline::LevelPlan;
use netsynth::tiling::{parse_templates, RoomTemplate};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct Case {
    pub name: String,
    pub mesh: Mesh,
    pub spec: FunctionalSpec,
    pub templates: Vec<RoomTemplate>,
}

/// Every fixture directory holding a spec, sorted by name.
pub fn cases() -> Vec<Case> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(fixture_root())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("spec.toml").exists())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|d| {
            let read = |f: &str| fs::read_to_string(d.join(f)).unwrap();
            let templates = if d.join("templates.toml").exists() {
                parse_templates(&read("templates.toml")).unwrap()
            } else {
                Vec::new()
            };
            Case {
                name: d.file_name().unwrap().to_string_lossy().into_owned(),
                mesh: load_mesh(&read("mesh.json")).unwrap(),
                spec: FunctionalSpec::from_toml(&read("spec.toml")).unwrap(),
                templates,
            }
        })
        .collect()
}

pub fn case(name: &str) -> Case {
    cases().into_iter().find(|c| c.name == name).unwrap()
}

pub fn street() -> (Mesh, LevelPlan) {
    let d = fixture_root().join("street3");
    let mesh = load_mesh(&fs::read_to_string(d.join("mesh.json")).unwrap()).unwrap();
    let plan = LevelPlan::from_toml(&fs::read_to_string(d.join("plan.toml")).unwrap()).unwrap();
    (mesh, plan)
}

pub fn sinks(mesh: &Mesh, spec: &FunctionalSpec) -> BTreeSet<VertexId> {
    match &spec.sinks {
        SinkSelection::Mesh => mesh.sinks().clone(),
        SinkSelection::Vertices(v) => v.iter().copied().collect(),
        SinkSelection::AllBoundary => (0..mesh.num_vertices())
            .filter(|&v| mesh.is_boundary_vertex(v) && !mesh.annotations().obstacle_vertices.contains(&v))
            .collect(),
    }
}

/// Edges a network may use under the spec.
pub fn candidates(mesh: &Mesh, spec: &FunctionalSpec) -> Vec<EdgeId> {
    let ann = mesh.annotations();
    (0..mesh.num_edges())
        .filter(|&e| {
            let ed = mesh.edge(e);
            !ann.obstacle_edges.contains(&e)
                && !ann.fixed_inactive.contains(&e)
                && !ann.obstacle_vertices.contains(&ed.a)
                && !ann.obstacle_vertices.contains(&ed.b)
                && !(spec.excludes_boundary() && mesh.is_boundary_edge(e) && !ann.fixed_active.contains(&e))
        })
        .collect()
}

pub fn degree(mesh: &Mesh, active: &BTreeSet<EdgeId>, v: VertexId) -> usize {
    mesh.vertex_edges(v).iter().filter(|e| active.contains(e)).count()
}

/// True when every connected piece of `active` touches a sink.
pub fn sink_connected(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> bool {
    islands(mesh, active, sinks).is_empty()
}

/// Sink-free components of `active`, each as a sorted edge list.
pub fn islands(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> Vec<Vec<EdgeId>> {
    let mut parent: Vec<usize> = (0..mesh.num_vertices()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &e in active {
        let (a, b) = (find(&mut parent, mesh.edge(e).a), find(&mut parent, mesh.edge(e).b));
        parent[a] = b;
    }
    let mut grounded = BTreeSet::new();
    for &s in sinks {
        grounded.insert(find(&mut parent, s));
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<EdgeId>> = Default::default();
    for &e in active {
        let r = find(&mut parent, mesh.edge(e).a);
        if !grounded.contains(&r) {
            groups.entry(r).or_default().push(e);
        }
    }
    groups.into_values().collect()
}

/// Hop distances between all vertex pairs over the whole mesh.
pub fn all_hops(mesh: &Mesh) -> Vec<Vec<usize>> {
    (0..mesh.num_vertices())
        .map(|s| {
            let mut d = vec![usize::MAX; mesh.num_vertices()];
            d[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for &e in mesh.vertex_edges(v) {
                    let w = mesh.other_end(e, v);
                    if d[w] == usize::MAX {
                        d[w] = d[v] + 1;
                        q.push_back(w);
                    }
                }
            }
            d
        })
        .collect()
}

/// Half-edge distances by repeated relaxation until nothing changes:
/// zero into a sink, otherwise own length plus the best non-reversing
/// successor. Inactive half-edges stay infinite.
pub fn relaxed_distances(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> Vec<f64> {
    let nh = 2 * mesh.num_edges();
    let mut d = vec![f64::INFINITY; nh];
    for h in 0..nh {
        if active.contains(&(h / 2)) && sinks.contains(&mesh.head(h)) {
            d[h] = 0.0;
        }
    }
    loop {
        let mut changed = false;
        for h in 0..nh {
            if !active.contains(&(h / 2)) || sinks.contains(&mesh.head(h)) {
                continue;
            }
            let j = mesh.head(h);
            for &e in mesh.vertex_edges(j) {
                if e == h / 2 || !active.contains(&e) {
                    continue;
                }
                let s = mesh.half_edge_of(e, j);
                let cand = mesh.half_edge_length(h) + d[s];
                if cand < d[h] {
                    d[h] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

/// Per-edge distance value (smaller direction) and its half-edge.
pub fn edge_distances(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> Vec<(EdgeId, HalfEdgeId, f64)> {
    let d = relaxed_distances(mesh, active, sinks);
    active
        .iter()
        .map(|&e| {
            let h = if d[2 * e + 1] < d[2 * e] { 2 * e + 1 } else { 2 * e };
            (e, h, d[h])
        })
        .collect()
}

pub fn total_distance(mesh: &Mesh, active: &BTreeSet<EdgeId>, sinks: &BTreeSet<VertexId>) -> f64 {
    edge_distances(mesh, active, sinks).iter().map(|x| x.2).sum()
}

pub fn total_length(mesh: &Mesh, active: &BTreeSet<EdgeId>) -> f64 {
    active.iter().map(|&e| mesh.edge(e).length).sum()
}

/// Feature counts recomputed from the definition of each feature.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Features {
    pub dead_ends: usize,
    pub max_degree: usize,
    pub t_junctions: usize,
}

pub fn features(mesh: &Mesh, spec: &FunctionalSpec, active: &BTreeSet<EdgeId>) -> Features {
    let cand: BTreeSet<EdgeId> = candidates(mesh, spec).into_iter().collect();
    let fixed = &mesh.annotations().fixed_active;
    let context = |v: VertexId| {
        spec.excludes_boundary()
            && mesh
                .vertex_edges(v)
                .iter()
                .any(|e| mesh.is_boundary_edge(*e) && !fixed.contains(e))
    };
    let mut f = Features::default();
    for v in 0..mesh.num_vertices() {
        let d = degree(mesh, active, v);
        f.max_degree = f.max_degree.max(d);
        if d == 1 && !context(v) {
            f.dead_ends += 1;
        }
        if d == 3 && mesh.valence(v) == 4 && mesh.vertex_edges(v).iter().all(|e| cand.contains(e) || fixed.contains(e)) {
            f.t_junctions += 1;
        }
    }
    f
}

/// Exhaustive optimum over all subsets of the candidate edges. Supports
/// specs whose only feature rules are forbidden dead ends, branches and
/// T-junctions. Returns the best objective and its edge set.
/// Every non-obstacle vertex lies within the coverage radius of a vertex
/// touched by `active`. `hops` comes from [`all_hops`].
pub fn covered(mesh: &Mesh, spec: &FunctionalSpec, hops: &[Vec<usize>], active: &BTreeSet<EdgeId>) -> bool {
    let obstacles = &mesh.annotations().obstacle_vertices;
    let touched: BTreeSet<VertexId> = active.iter().flat_map(|&e| [mesh.edge(e).a, mesh.edge(e).b]).collect();
    (0..mesh.num_vertices()).filter(|v| !obstacles.contains(v)).all(|v| {
        touched
            .iter()
            .any(|&u| !obstacles.contains(&u) && hops[v][u] <= spec.coverage_radius)
    })
}

pub struct BruteForce {
    /// (edge set, total length, total distance) of every feasible subset.
    pub feasible: Vec<(BTreeSet<EdgeId>, f64, f64)>,
}

impl BruteForce {
    pub fn new(mesh: &Mesh, spec: &FunctionalSpec) -> BruteForce {
        for p in [spec.zigzag, spec.proximity] {
            assert_eq!(p, Policy::Allowed, "brute force handles no patterns");
        }
        assert!(spec.fixings == Default::default() && spec.forced_routes.is_empty() && !spec.point_to_point.enabled);
        let cand = candidates(mesh, spec);
        assert!(cand.len() <= 20, "too many candidate edges for enumeration");
        let sinks = sinks(mesh, spec);
        let hops = all_hops(mesh);
        let fixed: BTreeSet<EdgeId> = mesh.annotations().fixed_active.clone();
        let mut feasible = Vec::new();
        for mask in 0u32..(1 << cand.len()) {
            let active: BTreeSet<EdgeId> = cand
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            if !fixed.is_subset(&active) || !sink_connected(mesh, &active, &sinks) {
                continue;
            }
            if !covered(mesh, spec, &hops, &active) {
                continue;
            }
            let f = features(mesh, spec, &active);
            if (spec.dead_ends == Policy::Forbidden && f.dead_ends > 0)
                || (spec.branches == Policy::Forbidden && f.max_degree > 2)
                || (spec.t_junctions == Policy::Forbidden && f.t_junctions > 0)
            {
                continue;
            }
            let len = total_length(mesh, &active);
            let dist = total_distance(mesh, &active, &sinks);
            feasible.push((active, len, dist));
        }
        BruteForce { feasible }
    }

    pub fn optimum(&self, lambda_length: f64, lambda_distance: f64) -> Option<f64> {
        self.feasible
            .iter()
            .map(|(_, l, d)| lambda_length * l + lambda_distance * d)
            .min_by(f64::total_cmp)
    }
}

/// All ways to cover `cells` exactly with axis-aligned `w`×`h` rectangles
/// (either orientation), each as a sorted list of rectangle cell sets.
pub fn rect_tilings(width: i32, height: i32, w: i32, h: i32) -> Vec<Vec<Vec<(i32, i32)>>> {
    fn go(
        free: &mut Vec<Vec<bool>>,
        shapes: &[(i32, i32)],
        acc: &mut Vec<Vec<(i32, i32)>>,
        out: &mut Vec<Vec<Vec<(i32, i32)>>>,
    ) {
        let (width, height) = (free.len() as i32, free[0].len() as i32);
        let first = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .find(|&(x, y)| free[x as usize][y as usize]);
        let Some((x0, y0)) = first else {
            let mut t = acc.clone();
            t.sort();
            out.push(t);
            return;
        };
        for &(w, h) in shapes {
            let cells: Vec<(i32, i32)> = (0..h).flat_map(|dy| (0..w).map(move |dx| (x0 + dx, y0 + dy))).collect();
            if cells
                .iter()
                .all(|&(x, y)| x < width && y < height && free[x as usize][y as usize])
            {
                for &(x, y) in &cells {
                    free[x as usize][y as usize] = false;
                }
                let mut sorted = cells.clone();
                sorted.sort();
                acc.push(sorted);
                go(free, shapes, acc, out);
                acc.pop();
                for &(x, y) in &cells {
                    free[x as usize][y as usize] = true;
                }
            }
        }
    }
    let shapes: Vec<(i32, i32)> = if w == h { vec![(w, h)] } else { vec![(w, h), (h, w)] };
    let mut free = vec![vec![true; height as usize]; width as usize];
    let mut out = Vec::new();
    go(&mut free, &shapes, &mut Vec::new(), &mut out);
    out
}

/// Cell of a face on a unit grid mesh with its corner at the origin.
pub fn face_cell(mesh: &Mesh, f: usize) -> (i32, i32) {
    let c = mesh.face_centroid(f);
    (c[0].floor() as i32, c[1].floor() as i32)
}

/// Inner and boundary edges of a face set.
pub fn room_edges(mesh: &Mesh, faces: &[usize]) -> (Vec<EdgeId>, Vec<EdgeId>) {
    let set: BTreeSet<usize> = faces.iter().copied().collect();
    let edges: BTreeSet<EdgeId> = faces.iter().flat_map(|&f| mesh.face_edges(f).iter().copied()).collect();
    let (mut inner, mut boundary) = (Vec::new(), Vec::new());
    for e in edges {
        if mesh.edge_faces(e).iter().filter(|f| set.contains(f)).count() == 2 {
            inner.push(e);
        } else {
            boundary.push(e);
        }
    }
    (inner, boundary)
}
