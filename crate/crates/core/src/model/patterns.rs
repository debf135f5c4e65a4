use std::collections::BTreeSet;

use super::{PatternLibrary, PatternShape};
use crate::mesh::{EdgeId, HalfEdgeId, Mesh, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Turn {
    Left,
    Right,
    Straight,
}

impl Turn {
    /// Classifies the turn from direction `a -> b` into `b -> c`.
    /// Left covers signed angles in [45°, 135°], right the mirror range,
    /// straight anything below 45° in magnitude; sharper turns are `None`.
    pub fn classify(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<Turn> {
        let d1 = [b[0] - a[0], b[1] - a[1]];
        let d2 = [c[0] - b[0], c[1] - b[1]];
        let cross = d1[0] * d2[1] - d1[1] * d2[0];
        let dot = d1[0] * d2[0] + d1[1] * d2[1];
        let deg = cross.atan2(dot).to_degrees();
        const EPS: f64 = 1e-9;
        if deg.abs() < 45.0 - EPS {
            Some(Turn::Straight)
        } else if (45.0 - EPS..=135.0 + EPS).contains(&deg) {
            Some(Turn::Left)
        } else if (-135.0 - EPS..=-45.0 + EPS).contains(&deg) {
            Some(Turn::Right)
        } else {
            None
        }
    }
}

/// One occurrence of an undesirable configuration, anchored at a half-edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternInstance {
    /// 0 for zig-zags, 1 for proximity.
    pub kind: u8,
    pub half_edge: HalfEdgeId,
    /// Index of the shape in its library list.
    pub shape: usize,
    /// Member edges, ascending.
    pub edges: Vec<EdgeId>,
}

fn turn_walks(mesh: &Mesh, h: HalfEdgeId, turns: &[Turn]) -> Vec<Vec<VertexId>> {
    let mut walks = vec![vec![mesh.tail(h), mesh.head(h)]];
    for &want in turns {
        let mut next = Vec::new();
        for walk in &walks {
            let n = walk.len();
            let (a, b) = (walk[n - 2], walk[n - 1]);
            for c in mesh.neighbors(b) {
                if walk.contains(&c) {
                    continue;
                }
                if Turn::classify(mesh.position(a), mesh.position(b), mesh.position(c)) == Some(want) {
                    let mut w = walk.clone();
                    w.push(c);
                    next.push(w);
                }
            }
        }
        walks = next;
    }
    walks
}

fn opposite_edges(mesh: &Mesh, e: EdgeId) -> Vec<EdgeId> {
    mesh.edge_faces(e)
        .iter()
        .filter_map(|&f| {
            let fe = mesh.face_edges(f);
            if fe.len() != 4 {
                return None;
            }
            let i = fe.iter().position(|&x| x == e)?;
            Some(fe[(i + 2) % 4])
        })
        .collect()
}

/// All instances of the library's shapes on the mesh, one per distinct edge
/// set and kind, in half-edge order. Only edges accepted by `candidate` may
/// take part.
pub fn pattern_instances(mesh: &Mesh, library: &PatternLibrary, candidate: &dyn Fn(EdgeId) -> bool) -> Vec<PatternInstance> {
    let mut out = Vec::new();
    let mut seen: BTreeSet<(u8, Vec<EdgeId>)> = BTreeSet::new();
    for (kind, shapes) in [(0u8, &library.zigzag), (1u8, &library.proximity)] {
        for h in 0..mesh.num_half_edges() {
            if !candidate(h / 2) {
                continue;
            }
            for (shape, pattern) in shapes.iter().enumerate() {
                let edge_sets: Vec<Vec<EdgeId>> = match pattern {
                    PatternShape::Turns(turns) => turn_walks(mesh, h, turns)
                        .iter()
                        .map(|w| {
                            w.windows(2)
                                .map(|p| mesh.edge_between(p[0], p[1]).expect("walk follows edges"))
                                .collect()
                        })
                        .collect(),
                    PatternShape::FaceOpposite => opposite_edges(mesh, h / 2)
                        .into_iter()
                        .map(|o| vec![h / 2, o])
                        .collect(),
                };
                for mut edges in edge_sets {
                    if !edges.iter().all(|&e| candidate(e)) {
                        continue;
                    }
                    edges.sort_unstable();
                    if seen.insert((kind, edges.clone())) {
                        out.push(PatternInstance {
                            kind,
                            half_edge: h,
                            shape,
                            edges,
                        });
                    }
                }
            }
        }
    }
    out
}
