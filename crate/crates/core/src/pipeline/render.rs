use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::document::SolutionDocument;
use crate::error::Result;
use crate::mesh::{EdgeId, FaceId, HalfEdgeId, Mesh, Point, VertexId};

/// Network of one level as drawn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderLayer {
    pub level: usize,
    pub active: BTreeSet<EdgeId>,
    /// Chosen half-edges with their distance values.
    pub half_edges: Vec<(HalfEdgeId, f64)>,
}

impl RenderLayer {
    pub fn from_document(mesh: &Mesh, doc: &SolutionDocument, level: usize) -> Result<RenderLayer> {
        Ok(RenderLayer {
            level,
            active: doc.edge_set(mesh)?,
            half_edges: doc.oriented(mesh)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderExtras {
    /// Selected rooms as (faces, template index).
    pub rooms: Vec<(Vec<FaceId>, usize)>,
    /// Smoothed curves drawn on top of the network.
    pub polylines: Vec<Vec<Point>>,
    pub sinks: Vec<VertexId>,
    pub samples: Vec<VertexId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    /// Drawing width in pixels; height follows the mesh aspect ratio.
    pub width: f64,
    /// Stroke width of the finest level.
    pub stroke: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle { width: 800.0, stroke: 2.0 }
    }
}

const ROOM_FILLS: [&str; 8] = [
    "#f4d35e", "#8ecae6", "#b5e48c", "#f7a072", "#cdb4db", "#ffafcc", "#a8dadc", "#e9c46a",
];

/// Colour of a distance value: linear ramp from blue at 0 to red at `max`.
pub fn ramp(d: f64, max: f64) -> String {
    let t = if max > 0.0 { (d / max).clamp(0.0, 1.0) } else { 0.0 };
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

/// Deterministic SVG of the mesh wireframe, rooms, the networks of all
/// layers (coarser levels drawn wider, half-edges coloured by distance
/// value), smoothed curves and markers, with a legend for the colour ramp.
pub fn render_svg(mesh: &Mesh, layers: &[RenderLayer], extras: &RenderExtras, style: &RenderStyle) -> String {
    let pts = mesh.positions();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts.iter().chain(extras.polylines.iter().flatten()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    let span = [(hi[0] - lo[0]).max(1e-9), (hi[1] - lo[1]).max(1e-9)];
    let margin = 20.0;
    let scale = (style.width - 2.0 * margin) / span[0].max(span[1]);
    let w = span[0] * scale + 2.0 * margin;
    let legend_h = 40.0;
    let h = span[1] * scale + 2.0 * margin + legend_h;
    let map = |p: Point| -> (f64, f64) { (margin + (p[0] - lo[0]) * scale, margin + (hi[1] - p[1]) * scale) };
    let xy = |p: Point| {
        let (x, y) = map(p);
        format!("{x:.3},{y:.3}")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.3}\" height=\"{h:.3}\" viewBox=\"0 0 {w:.3} {h:.3}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");

    let ann = mesh.annotations();
    let _ = writeln!(s, "<g id=\"faces\">");
    for (faces, t) in &extras.rooms {
        for &f in faces {
            let poly: Vec<String> = mesh.face(f).iter().map(|&v| xy(pts[v])).collect();
            let _ = writeln!(
                s,
                "<polygon points=\"{}\" fill=\"{}\" stroke=\"none\"/>",
                poly.join(" "),
                ROOM_FILLS[t % ROOM_FILLS.len()]
            );
        }
    }
    for &f in &ann.obstacle_faces {
        let poly: Vec<String> = mesh.face(f).iter().map(|&v| xy(pts[v])).collect();
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"#9e9e9e\" stroke=\"none\"/>", poly.join(" "));
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, "<g id=\"wireframe\" stroke=\"#d0d0d0\" stroke-width=\"0.5\">");
    for e in mesh.edges() {
        let (a, b) = (map(pts[e.a]), map(pts[e.b]));
        let _ = writeln!(s, "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\"/>", a.0, a.1, b.0, b.1);
    }
    let _ = writeln!(s, "</g>");

    let max_d = layers
        .iter()
        .flat_map(|l| l.half_edges.iter().map(|x| x.1))
        .fold(0.0, f64::max);
    let levels = layers.iter().map(|l| l.level).max().map_or(1, |m| m + 1);
    let mut order: Vec<&RenderLayer> = layers.iter().collect();
    order.sort_by_key(|l| std::cmp::Reverse(l.level));
    for layer in order {
        let width = style.stroke * (levels - layer.level) as f64;
        let _ = writeln!(
            s,
            "<g id=\"level-{}\" stroke-width=\"{width:.3}\" stroke-linecap=\"round\">",
            layer.level
        );
        let oriented: BTreeMap<EdgeId, (HalfEdgeId, f64)> = layer.half_edges.iter().map(|&(h, d)| (h / 2, (h, d))).collect();
        for &e in &layer.active {
            let (a, b, colour) = match oriented.get(&e) {
                Some(&(h, d)) => (map(pts[mesh.tail(h)]), map(pts[mesh.head(h)]), ramp(d, max_d)),
                None => (map(pts[mesh.edge(e).a]), map(pts[mesh.edge(e).b]), "#404040".to_string()),
            };
            let _ = writeln!(
                s,
                "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"{colour}\"/>",
                a.0, a.1, b.0, b.1
            );
        }
        let _ = writeln!(s, "</g>");
    }

    if !extras.polylines.is_empty() {
        let _ = writeln!(
            s,
            "<g id=\"smoothed\" fill=\"none\" stroke=\"#202020\" stroke-width=\"{:.3}\">",
            style.stroke * 0.75
        );
        for line in &extras.polylines {
            let p: Vec<String> = line.iter().map(|&q| xy(q)).collect();
            let _ = writeln!(s, "<polyline points=\"{}\"/>", p.join(" "));
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, "<g id=\"markers\">");
    for &v in &ann.obstacle_vertices {
        let (x, y) = map(pts[v]);
        let _ = writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"#9e9e9e\"/>");
    }
    for &v in &extras.sinks {
        let (x, y) = map(pts[v]);
        let _ = writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\" fill=\"#000000\"/>");
    }
    for &v in &extras.samples {
        let (x, y) = map(pts[v]);
        let _ = writeln!(
            s,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"7\" height=\"7\" fill=\"#2a9d8f\"/>",
            x - 3.5,
            y - 3.5
        );
    }
    let _ = writeln!(s, "</g>");

    if layers.iter().any(|l| !l.half_edges.is_empty()) {
        let y0 = h - legend_h + 8.0;
        let _ = writeln!(s, "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"11\">");
        let steps = 16;
        let bar = 160.0;
        for i in 0..steps {
            let d = max_d * i as f64 / (steps - 1) as f64;
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{y0:.3}\" width=\"{:.3}\" height=\"10\" fill=\"{}\"/>",
                margin + bar * i as f64 / steps as f64,
                bar / steps as f64,
                ramp(d, max_d)
            );
        }
        let _ = writeln!(s, "<text x=\"{margin:.3}\" y=\"{:.3}\">0</text>", y0 + 24.0);
        let _ = writeln!(
            s,
            "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{max_d:.3}</text>",
            margin + bar,
            y0 + 24.0
        );
        let _ = writeln!(s, "<text x=\"{:.3}\" y=\"{:.3}\">distance value</text>", margin + bar + 10.0, y0 + 9.0);
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}
