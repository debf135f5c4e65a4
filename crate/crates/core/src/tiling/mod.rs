//! Room templates, their placements on a quad grid, and the exact-cover rows
//! that tie rooms to the network.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, FaceId, Mesh};
use crate::model::{Comparator, IpModel, RowFamily, VarId, VarRole};

pub type Cell = [i32; 2];

/// Polyomino room shape with its symmetries and optional occurrence bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomTemplate {
    pub name: String,
    /// Face offsets on the grid.
    pub cells: Vec<Cell>,
    #[serde(default = "yes")]
    pub rotations: bool,
    #[serde(default = "yes")]
    pub reflections: bool,
    #[serde(default)]
    pub min: Option<usize>,
    #[serde(default)]
    pub max: Option<usize>,
}

fn yes() -> bool {
    true
}

impl RoomTemplate {
    pub fn new(name: impl Into<String>, cells: Vec<Cell>) -> Self {
        RoomTemplate {
            name: name.into(),
            cells,
            rotations: true,
            reflections: true,
            min: None,
            max: None,
        }
    }

    /// `w` by `h` rectangle.
    pub fn rect(name: impl Into<String>, w: i32, h: i32) -> Self {
        let cells = (0..h).flat_map(|y| (0..w).map(move |x| [x, y])).collect();
        Self::new(name, cells)
    }

    pub fn with_bounds(mut self, min: Option<usize>, max: Option<usize>) -> Self {
        self.min = min;
        self.max = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let set: BTreeSet<Cell> = self.cells.iter().copied().collect();
        if set.is_empty() {
            return Err(Error::InvalidSpec(format!("template {} has no cells", self.name)));
        }
        if set.len() != self.cells.len() {
            return Err(Error::InvalidSpec(format!("template {} repeats a cell", self.name)));
        }
        let start = *set.iter().next().expect("non-empty");
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some([x, y]) = queue.pop_front() {
            for n in [[x + 1, y], [x - 1, y], [x, y + 1], [x, y - 1]] {
                if set.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if seen.len() != set.len() {
            return Err(Error::InvalidSpec(format!("template {} is not edge-connected", self.name)));
        }
        Ok(())
    }

    /// Distinct normalized shapes under the allowed symmetries, sorted.
    pub fn variants(&self) -> Vec<Vec<Cell>> {
        let rotations = if self.rotations { 4 } else { 1 };
        let mirrors: &[bool] = if self.reflections { &[false, true] } else { &[false] };
        let mut out = BTreeSet::new();
        for &m in mirrors {
            for r in 0..rotations {
                let cells: Vec<Cell> = self
                    .cells
                    .iter()
                    .map(|&[x, y]| {
                        let [mut x, mut y] = if m { [-x, y] } else { [x, y] };
                        for _ in 0..r {
                            (x, y) = (-y, x);
                        }
                        [x, y]
                    })
                    .collect();
                out.insert(normalize(cells));
            }
        }
        out.into_iter().collect()
    }
}

fn normalize(mut cells: Vec<Cell>) -> Vec<Cell> {
    let mx = cells.iter().map(|c| c[0]).min().unwrap_or(0);
    let my = cells.iter().map(|c| c[1]).min().unwrap_or(0);
    for c in &mut cells {
        c[0] -= mx;
        c[1] -= my;
    }
    cells.sort_unstable();
    cells
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Catalogue {
    #[serde(default)]
    template: Vec<RoomTemplate>,
}

/// Reads a TOML catalogue of `[[template]]` tables.
pub fn parse_templates(text: &str) -> Result<Vec<RoomTemplate>> {
    let cat: Catalogue = toml::from_str(text)?;
    for t in &cat.template {
        t.validate()?;
    }
    Ok(cat.template)
}

pub fn templates_to_toml(templates: &[RoomTemplate]) -> Result<String> {
    toml::to_string(&Catalogue {
        template: templates.to_vec(),
    })
    .map_err(|e| Error::Parse(e.to_string()))
}

/// Integer coordinates of every face of a mesh that is a subset of a quad grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAddress {
    pub coords: Vec<Cell>,
    by_cell: BTreeMap<Cell, FaceId>,
}

impl GridAddress {
    pub fn face_at(&self, c: Cell) -> Option<FaceId> {
        self.by_cell.get(&c).copied()
    }

    /// Smallest and largest coordinates in use.
    pub fn extent(&self) -> (Cell, Cell) {
        let lo = [
            self.coords.iter().map(|c| c[0]).min().unwrap_or(0),
            self.coords.iter().map(|c| c[1]).min().unwrap_or(0),
        ];
        let hi = [
            self.coords.iter().map(|c| c[0]).max().unwrap_or(0),
            self.coords.iter().map(|c| c[1]).max().unwrap_or(0),
        ];
        (lo, hi)
    }
}

const STEP: [Cell; 4] = [[0, -1], [1, 0], [0, 1], [-1, 0]];

/// Assigns grid coordinates by walking face adjacency from face 0. Each face
/// carries a frame mapping its edge slots to compass directions, so meshes
/// with mixed face orientation are handled.
pub fn grid_address(mesh: &Mesh) -> Result<GridAddress> {
    let nf = mesh.num_faces();
    if let Some(f) = (0..nf).find(|&f| mesh.face(f).len() != 4) {
        return Err(Error::NotGridAddressable(format!("face {f} is not a quad")));
    }
    // frame: (direction of slot 0, +1 or -1 per slot)
    let mut frame: Vec<Option<(i32, i32)>> = vec![None; nf];
    let mut coords: Vec<Cell> = vec![[0, 0]; nf];
    let mut by_cell: BTreeMap<Cell, FaceId> = BTreeMap::new();
    for root in 0..nf {
        if frame[root].is_some() {
            continue;
        }
        if root != 0 {
            return Err(Error::NotGridAddressable("faces are not edge-connected".into()));
        }
        frame[root] = Some((0, 1));
        by_cell.insert([0, 0], root);
        let mut queue = VecDeque::from([root]);
        while let Some(f) = queue.pop_front() {
            let (d0, s) = frame[f].expect("visited");
            let fe = mesh.face_edges(f);
            let fv = mesh.face(f);
            for i in 0..4 {
                let e = fe[i];
                let dir = (d0 + s * i as i32).rem_euclid(4);
                let Some(&g) = mesh.edge_faces(e).iter().find(|&&g| g != f) else {
                    continue;
                };
                let ge = mesh.face_edges(g);
                let j = ge.iter().position(|&x| x == e).expect("shared edge");
                let gv = mesh.face(g);
                let same_way = gv[j] == fv[(i + 1) % 4];
                let sg = if same_way { s } else { -s };
                let dj = (dir + 2).rem_euclid(4);
                let g_frame = ((dj - sg * j as i32).rem_euclid(4), sg);
                let step = STEP[dir as usize];
                let cell = [coords[f][0] + step[0], coords[f][1] + step[1]];
                match frame[g] {
                    Some(existing) => {
                        if existing != g_frame || coords[g] != cell {
                            return Err(Error::NotGridAddressable(format!(
                                "faces {f} and {g} disagree on grid placement"
                            )));
                        }
                    }
                    None => {
                        if let Some(&other) = by_cell.get(&cell) {
                            return Err(Error::NotGridAddressable(format!(
                                "faces {other} and {g} map to the same grid cell"
                            )));
                        }
                        frame[g] = Some(g_frame);
                        coords[g] = cell;
                        by_cell.insert(cell, g);
                        queue.push_back(g);
                    }
                }
            }
        }
    }
    // faces next to each other on the grid must share an edge
    for f in 0..nf {
        for step in STEP {
            let c = [coords[f][0] + step[0], coords[f][1] + step[1]];
            if let Some(g) = by_cell.get(&c) {
                if !mesh.face_neighbors(f).any(|x| x == *g) {
                    return Err(Error::NotGridAddressable(format!("faces {f} and {g} touch without sharing an edge")));
                }
            }
        }
    }
    Ok(GridAddress { coords, by_cell })
}

/// One potential room: a template instance on concrete faces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomPlacement {
    pub template: usize,
    /// Ascending face ids.
    pub faces: Vec<FaceId>,
    /// Edges with both incident faces in the room.
    pub inner: Vec<EdgeId>,
    /// Edges with exactly one incident face in the room.
    pub boundary: Vec<EdgeId>,
    /// `R_x` once constraints are built.
    pub var: Option<VarId>,
}

fn placement(mesh: &Mesh, template: usize, faces: Vec<FaceId>) -> RoomPlacement {
    let set: BTreeSet<FaceId> = faces.iter().copied().collect();
    let mut inner = BTreeSet::new();
    let mut boundary = BTreeSet::new();
    for &f in &faces {
        for &e in mesh.face_edges(f) {
            let inside = mesh.edge_faces(e).iter().filter(|g| set.contains(g)).count();
            if inside >= 2 {
                inner.insert(e);
            } else {
                boundary.insert(e);
            }
        }
    }
    RoomPlacement {
        template,
        faces,
        inner: inner.into_iter().collect(),
        boundary: boundary.into_iter().collect(),
        var: None,
    }
}

/// Every distinct placement of every template under its symmetries that fits
/// in the mesh and avoids obstacle faces. Ordered by template, then face set.
pub fn enumerate_placements(mesh: &Mesh, templates: &[RoomTemplate]) -> Result<Vec<RoomPlacement>> {
    for t in templates {
        t.validate()?;
    }
    let grid = grid_address(mesh)?;
    let obstacles = &mesh.annotations().obstacle_faces;
    let jobs: Vec<(usize, &RoomTemplate)> = templates.iter().enumerate().collect();
    let per_template = crate::par::map(jobs, true, |(ti, t)| {
        let mut sets: BTreeSet<Vec<FaceId>> = BTreeSet::new();
        for variant in t.variants() {
            for anchor in &grid.coords {
                let offset = [anchor[0] - variant[0][0], anchor[1] - variant[0][1]];
                let faces: Option<Vec<FaceId>> = variant
                    .iter()
                    .map(|c| grid.face_at([c[0] + offset[0], c[1] + offset[1]]))
                    .map(|f| f.filter(|f| !obstacles.contains(f)))
                    .collect();
                if let Some(mut faces) = faces {
                    faces.sort_unstable();
                    sets.insert(faces);
                }
            }
        }
        sets.into_iter().map(|faces| placement(mesh, ti, faces)).collect::<Vec<_>>()
    });
    Ok(per_template.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TilingMode {
    Floorplan,
    Gamelevel,
}

/// Adds one `R_x` per placement, the exact-cover row per face and the
/// room/network coupling rows of `mode`. Requires the network edge variables.
pub fn build_tiling_constraints(
    mesh: &Mesh,
    placements: &mut [RoomPlacement],
    mode: TilingMode,
    model: &mut IpModel,
) -> Result<()> {
    let edge_var = model
        .layout()
        .ok_or_else(|| Error::MalformedModel("tiling needs the network edge variables".into()))?
        .edge_var
        .clone();
    let obstacles = &mesh.annotations().obstacle_faces;
    let mut cover: Vec<Vec<VarId>> = vec![Vec::new(); mesh.num_faces()];
    for (x, p) in placements.iter_mut().enumerate() {
        let r = model.add_bool(format!("R_{x}"), VarRole::Placement(x))?;
        p.var = Some(r);
        for &f in &p.faces {
            cover[f].push(r);
        }
    }
    for f in 0..mesh.num_faces() {
        let rhs = if obstacles.contains(&f) { 0.0 } else { 1.0 };
        if cover[f].is_empty() {
            if rhs > 0.0 {
                return Err(Error::Infeasible(format!("face {f} is covered by no room placement")));
            }
            continue;
        }
        let terms = cover[f].iter().map(|&r| (r, 1.0)).collect();
        model.add_row(format!("tile_{f}"), terms, Comparator::Eq, rhs, RowFamily::Tiling)?;
    }
    for (x, p) in placements.iter().enumerate() {
        let r = p.var.expect("assigned above");
        let ni = p.inner.len() as f64;
        let nb = p.boundary.len() as f64;
        let inner = p.inner.iter().map(|&e| (edge_var[e], 1.0));
        let bnd = p.boundary.iter().map(|&e| (edge_var[e], 1.0));
        match mode {
            TilingMode::Floorplan => {
                if !p.inner.is_empty() {
                    let terms = std::iter::once((r, ni)).chain(inner).collect();
                    model.add_row(format!("room_inner_{x}"), terms, Comparator::Le, ni, RowFamily::RoomInterior)?;
                }
                let terms = std::iter::once((r, 1.0)).chain(bnd.map(|(v, _)| (v, -1.0))).collect();
                model.add_row(format!("room_access_{x}"), terms, Comparator::Le, 0.0, RowFamily::RoomAccess)?;
            }
            TilingMode::Gamelevel => {
                let terms = std::iter::once((r, 1.0)).chain(inner.map(|(v, _)| (v, -1.0))).collect();
                model.add_row(format!("room_inner_{x}"), terms, Comparator::Le, 0.0, RowFamily::RoomInterior)?;
                if !p.boundary.is_empty() {
                    let terms = std::iter::once((r, nb)).chain(bnd).collect();
                    model.add_row(format!("room_access_{x}"), terms, Comparator::Le, nb, RowFamily::RoomAccess)?;
                }
            }
        }
    }
    Ok(())
}

/// `min_t <= #rooms of template t <= max_t` for every bounded template.
pub fn build_room_count_constraints(
    placements: &[RoomPlacement],
    templates: &[RoomTemplate],
    model: &mut IpModel,
) -> Result<()> {
    for (t, tpl) in templates.iter().enumerate() {
        if let (Some(lo), Some(hi)) = (tpl.min, tpl.max) {
            if lo > hi {
                return Err(Error::InvalidSpec(format!("template {} has min {lo} > max {hi}", tpl.name)));
            }
        }
        if tpl.min.is_none() && tpl.max.is_none() {
            continue;
        }
        let vars: Vec<VarId> = placements
            .iter()
            .filter(|p| p.template == t)
            .map(|p| p.var.ok_or_else(|| Error::MalformedModel("placement has no variable".into())))
            .collect::<Result<_>>()?;
        if tpl.max == Some(0) {
            for &v in &vars {
                model.fix(v, 0.0)?;
            }
        }
        if vars.is_empty() {
            if tpl.min.unwrap_or(0) > 0 {
                return Err(Error::Infeasible(format!("template {} has no placements", tpl.name)));
            }
            continue;
        }
        let terms: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
        match (tpl.min, tpl.max) {
            (Some(lo), Some(hi)) if lo == hi => {
                model.add_row(format!("rooms_eq_{t}"), terms, Comparator::Eq, lo as f64, RowFamily::RoomCount)?
            }
            (lo, hi) => {
                if let Some(lo) = lo.filter(|&l| l > 0) {
                    model.add_row(format!("rooms_min_{t}"), terms.clone(), Comparator::Ge, lo as f64, RowFamily::RoomCount)?;
                }
                if let Some(hi) = hi {
                    model.add_row(format!("rooms_max_{t}"), terms, Comparator::Le, hi as f64, RowFamily::RoomCount)?;
                }
            }
        }
    }
    Ok(())
}

/// Plain-text grid map: one `face x y room template` line per face (room and
/// template are `-` when uncovered) and one `edge id a b 0|1` line per edge.
pub fn grid_map(
    mesh: &Mesh,
    placements: &[RoomPlacement],
    selected: &[usize],
    templates: &[RoomTemplate],
    active: &BTreeSet<EdgeId>,
) -> Result<String> {
    let grid = grid_address(mesh)?;
    let mut room_of: Vec<Option<usize>> = vec![None; mesh.num_faces()];
    for &x in selected {
        let p = placements
            .get(x)
            .ok_or_else(|| Error::InvalidQuery(format!("placement {x} does not exist")))?;
        for &f in &p.faces {
            room_of[f] = Some(x);
        }
    }
    let (lo, hi) = grid.extent();
    let mut out = String::new();
    let _ = writeln!(out, "gridmap {} {}", hi[0] - lo[0] + 1, hi[1] - lo[1] + 1);
    let mut faces: Vec<FaceId> = (0..mesh.num_faces()).collect();
    faces.sort_by_key(|&f| (grid.coords[f][1], grid.coords[f][0]));
    for f in faces {
        let c = grid.coords[f];
        let (room, tpl) = match room_of[f] {
            Some(x) => (x.to_string(), templates.get(placements[x].template).map_or("-".to_string(), |t| t.name.clone())),
            None => ("-".to_string(), "-".to_string()),
        };
        let _ = writeln!(out, "face {} {} {} {} {}", f, c[0] - lo[0], c[1] - lo[1], room, tpl);
    }
    for (e, edge) in mesh.edges().iter().enumerate() {
        let _ = writeln!(out, "edge {} {} {} {}", e, edge.a, edge.b, active.contains(&e) as u8);
    }
    Ok(out)
}
