//! Snake (active contour) smoothing of a solved network.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{EdgeId, Mesh, Point, VertexId};
use crate::model::Turn;

/// Tension, stiffness and inertia weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnakeWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SnakeWeights {
    pub const TOP: SnakeWeights = SnakeWeights {
        alpha: 1.0,
        beta: 4.0,
        gamma: 1.0,
    };
    pub const BOTTOM: SnakeWeights = SnakeWeights {
        alpha: 1.0,
        beta: 1.0,
        gamma: 4.0,
    };

    /// Level 0 is the coarsest; levels in between interpolate linearly.
    pub fn for_level(level: usize, num_levels: usize) -> SnakeWeights {
        if num_levels <= 1 {
            return Self::TOP;
        }
        let t = level.min(num_levels - 1) as f64 / (num_levels - 1) as f64;
        let mix = |a: f64, b: f64| a + (b - a) * t;
        SnakeWeights {
            alpha: mix(Self::TOP.alpha, Self::BOTTOM.alpha),
            beta: mix(Self::TOP.beta, Self::BOTTOM.beta),
            gamma: mix(Self::TOP.gamma, Self::BOTTOM.gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidSpec("snake weights must be finite and >= 0".into()))
        }
    }
}

/// A chain of network vertices, possibly subdivided.
#[derive(Debug, Clone, PartialEq)]
pub struct Snake {
    pub points: Vec<Point>,
    pub original: Vec<Point>,
    /// Mesh vertex behind each point; `None` for subdivision points.
    pub vertices: Vec<Option<VertexId>>,
    pub closed: bool,
    pub weights: SnakeWeights,
}

impl Snake {
    pub fn new(points: Vec<Point>, closed: bool, weights: SnakeWeights) -> Result<Snake> {
        let min = if closed { 3 } else { 2 };
        if points.len() < min {
            return Err(Error::InvalidQuery(format!("snake needs at least {min} points")));
        }
        weights.validate()?;
        Ok(Snake {
            original: points.clone(),
            vertices: vec![None; points.len()],
            points,
            closed,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn step(&self) -> f64 {
        let n = self.points.len();
        if self.closed {
            1.0 / n as f64
        } else {
            1.0 / (n - 1) as f64
        }
    }

    fn quad_weight(&self, i: usize) -> f64 {
        let h = self.step();
        if !self.closed && (i == 0 || i + 1 == self.points.len()) {
            h / 2.0
        } else {
            h
        }
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        !self.closed && (i == 0 || i + 1 == self.points.len())
    }

    /// Stencil of `u_s` at `i` as (index, coefficient) pairs.
    fn d1(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.points.len();
        let h = self.step();
        if self.closed {
            return vec![((i + 1) % n, 0.5 / h), ((i + n - 1) % n, -0.5 / h)];
        }
        if i == 0 {
            vec![(1, 1.0 / h), (0, -1.0 / h)]
        } else if i + 1 == n {
            vec![(n - 1, 1.0 / h), (n - 2, -1.0 / h)]
        } else {
            vec![(i + 1, 0.5 / h), (i - 1, -0.5 / h)]
        }
    }

    /// Stencil of `u_ss` at `i`; open endpoints reuse the neighbouring
    /// interior stencil.
    fn d2(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.points.len();
        let h2 = self.step().powi(2);
        if self.closed {
            return vec![((i + n - 1) % n, 1.0 / h2), (i, -2.0 / h2), ((i + 1) % n, 1.0 / h2)];
        }
        if n < 3 {
            return Vec::new();
        }
        let c = i.clamp(1, n - 2);
        vec![(c - 1, 1.0 / h2), (c, -2.0 / h2), (c + 1, 1.0 / h2)]
    }

    fn apply(&self, stencil: &[(usize, f64)]) -> Point {
        stencil.iter().fold([0.0, 0.0], |acc, &(j, c)| {
            [acc[0] + c * self.points[j][0], acc[1] + c * self.points[j][1]]
        })
    }
}

fn norm2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// Per-term energies `(tension, stiffness, inertia)` before weighting.
pub fn energy_terms(snake: &Snake) -> (f64, f64, f64) {
    let (mut t, mut s, mut i) = (0.0, 0.0, 0.0);
    for k in 0..snake.len() {
        let w = snake.quad_weight(k);
        t += w * norm2(snake.apply(&snake.d1(k)));
        s += w * norm2(snake.apply(&snake.d2(k)));
        let d = [snake.points[k][0] - snake.original[k][0], snake.points[k][1] - snake.original[k][1]];
        i += w * norm2(d);
    }
    (t, s, i)
}

/// Weighted discrete energy: finite differences with trapezoidal quadrature.
pub fn snake_energy(snake: &Snake) -> f64 {
    let (t, s, i) = energy_terms(snake);
    let w = snake.weights;
    w.alpha * t + w.beta * s + w.gamma * i
}

/// Exact gradient of [`snake_energy`] with respect to each point, zero at
/// pinned endpoints.
pub fn snake_gradient(snake: &Snake) -> Vec<Point> {
    let n = snake.len();
    let w = snake.weights;
    let mut g = vec![[0.0, 0.0]; n];
    for k in 0..n {
        let q = snake.quad_weight(k);
        for (stencil, weight) in [(snake.d1(k), w.alpha), (snake.d2(k), w.beta)] {
            if weight == 0.0 {
                continue;
            }
            let v = snake.apply(&stencil);
            for &(j, c) in &stencil {
                g[j][0] += 2.0 * weight * q * c * v[0];
                g[j][1] += 2.0 * weight * q * c * v[1];
            }
        }
        if w.gamma != 0.0 {
            g[k][0] += 2.0 * w.gamma * q * (snake.points[k][0] - snake.original[k][0]);
            g[k][1] += 2.0 * w.gamma * q * (snake.points[k][1] - snake.original[k][1]);
        }
    }
    for (k, gk) in g.iter_mut().enumerate() {
        if snake.is_pinned(k) {
            *gk = [0.0, 0.0];
        }
    }
    g
}

/// Inserts midpoints `k` times.
pub fn subdivide_snake(snake: &Snake, k: usize) -> Snake {
    let mut s = snake.clone();
    for _ in 0..k {
        let n = s.len();
        let segs = if s.closed { n } else { n - 1 };
        let mut pts = Vec::with_capacity(n + segs);
        let mut orig = Vec::with_capacity(n + segs);
        let mut verts = Vec::with_capacity(n + segs);
        for i in 0..n {
            pts.push(s.points[i]);
            orig.push(s.original[i]);
            verts.push(s.vertices[i]);
            if i < segs {
                let j = (i + 1) % n;
                let mid = |a: Point, b: Point| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                pts.push(mid(s.points[i], s.points[j]));
                orig.push(mid(s.original[i], s.original[j]));
                verts.push(None);
            }
        }
        s.points = pts;
        s.original = orig;
        s.vertices = verts;
    }
    s
}

fn network_valence(mesh: &Mesh, active: &BTreeSet<EdgeId>) -> Vec<usize> {
    let mut val = vec![0; mesh.num_vertices()];
    for &e in active {
        val[mesh.edge(e).a] += 1;
        val[mesh.edge(e).b] += 1;
    }
    val
}

/// Splits the active edges into edge-disjoint vertex chains. Open chains end
/// at vertices whose network valence is not 2; at even junctions a chain
/// carries straight on when an unused edge continues without turning.
/// Components made only of valence-2 vertices become closed snakes. Each
/// snake is then subdivided `subdivisions` times.
pub fn extract_snakes(
    mesh: &Mesh,
    active: &BTreeSet<EdgeId>,
    weights: SnakeWeights,
    subdivisions: usize,
) -> Result<Vec<Snake>> {
    if active.is_empty() {
        return Err(Error::InvalidNetwork("network has no active edges".into()));
    }
    if let Some(&e) = active.iter().find(|&&e| e >= mesh.num_edges()) {
        return Err(Error::InvalidQuery(format!("edge {e} does not exist")));
    }
    let val = network_valence(mesh, active);
    let mut used: BTreeSet<EdgeId> = BTreeSet::new();
    let incident = |v: VertexId| -> Vec<EdgeId> {
        let mut es: Vec<EdgeId> = mesh.vertex_edges(v).iter().copied().filter(|e| active.contains(e)).collect();
        es.sort_unstable();
        es
    };
    let mut chains: Vec<(Vec<VertexId>, bool)> = Vec::new();
    for start in 0..mesh.num_vertices() {
        if val[start] == 0 || val[start] == 2 {
            continue;
        }
        for e0 in incident(start) {
            if used.contains(&e0) {
                continue;
            }
            used.insert(e0);
            let mut chain = vec![start, mesh.other_end(e0, start)];
            loop {
                let n = chain.len();
                let (prev, v) = (chain[n - 2], chain[n - 1]);
                if v == start || chain[..n - 1].contains(&v) {
                    break;
                }
                let free: Vec<EdgeId> = incident(v).into_iter().filter(|e| !used.contains(e)).collect();
                let next = if val[v] == 2 {
                    free.first().copied()
                } else if val[v] >= 4 && val[v] % 2 == 0 {
                    free.iter().copied().find(|&f| {
                        let w = mesh.other_end(f, v);
                        !chain.contains(&w)
                            && Turn::classify(mesh.position(prev), mesh.position(v), mesh.position(w))
                                == Some(Turn::Straight)
                    })
                } else {
                    None
                };
                match next {
                    Some(f) => {
                        used.insert(f);
                        chain.push(mesh.other_end(f, v));
                    }
                    None => break,
                }
            }
            chains.push((chain, false));
        }
    }
    for e in active.iter().copied() {
        if used.contains(&e) {
            continue;
        }
        let edge = mesh.edge(e);
        let start = edge.a;
        let mut chain = vec![start];
        let mut v = start;
        let mut via = e;
        used.insert(e);
        loop {
            let w = mesh.other_end(via, v);
            if w == start {
                break;
            }
            chain.push(w);
            let next = incident(w).into_iter().find(|f| !used.contains(f));
            match next {
                Some(f) => {
                    used.insert(f);
                    v = w;
                    via = f;
                }
                None => break,
            }
        }
        chains.push((chain, true));
    }
    chains
        .into_iter()
        .map(|(chain, closed)| {
            let pts = chain.iter().map(|&v| mesh.position(v)).collect();
            let mut s = Snake::new(pts, closed, weights)?;
            s.vertices = chain.into_iter().map(Some).collect();
            Ok(subdivide_snake(&s, subdivisions))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepPolicy {
    pub max_iterations: usize,
    /// Stop once no point moves farther than this in one step.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            max_iterations: 2000,
            tolerance: 1e-6,
            initial_step: 1e-2,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothReport {
    pub snakes: Vec<Snake>,
    pub iterations: usize,
    /// Total energy before the first step and after every accepted step.
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Vertex(VertexId),
    Point(usize, usize),
}

fn key(snakes: &[Snake], s: usize, i: usize) -> Key {
    match snakes[s].vertices[i] {
        Some(v) => Key::Vertex(v),
        None => Key::Point(s, i),
    }
}

fn total_energy(snakes: &[Snake]) -> f64 {
    snakes.iter().map(snake_energy).sum()
}

/// Gradient descent with backtracking line search over all snakes at once.
/// Points shared by several snakes move by the average of their gradients;
/// points that end any open snake stay fixed.
pub fn smooth(snakes: &[Snake], policy: &StepPolicy) -> SmoothReport {
    let mut snakes = snakes.to_vec();
    let mut pinned: BTreeSet<Key> = BTreeSet::new();
    let mut owners: BTreeMap<Key, Vec<(usize, usize)>> = BTreeMap::new();
    for s in 0..snakes.len() {
        for i in 0..snakes[s].len() {
            let k = key(&snakes, s, i);
            if snakes[s].is_pinned(i) {
                pinned.insert(k);
            }
            owners.entry(k).or_default().push((s, i));
        }
    }
    let mut energy = total_energy(&snakes);
    let mut energies = vec![energy];
    let mut step = policy.initial_step;
    let mut iterations = 0;
    while iterations < policy.max_iterations {
        let grads: Vec<Vec<Point>> = snakes.iter().map(snake_gradient).collect();
        let mut dir: BTreeMap<Key, Point> = BTreeMap::new();
        let mut slope = 0.0;
        for (k, own) in &owners {
            if pinned.contains(k) {
                continue;
            }
            let mut g = [0.0, 0.0];
            for &(s, i) in own {
                g[0] += grads[s][i][0];
                g[1] += grads[s][i][1];
            }
            let m = own.len() as f64;
            let d = [-g[0] / m, -g[1] / m];
            slope += g[0] * d[0] + g[1] * d[1];
            dir.insert(*k, d);
        }
        if slope >= 0.0 || dir.values().all(|d| norm2(*d) == 0.0) {
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..policy.max_backtracks {
            let mut trial = snakes.clone();
            for (k, d) in &dir {
                for &(s, i) in &owners[k] {
                    trial[s].points[i][0] += t * d[0];
                    trial[s].points[i][1] += t * d[1];
                }
            }
            let e = total_energy(&trial);
            if e <= energy + policy.armijo * t * slope {
                accepted = Some((trial, e, t));
                break;
            }
            t *= policy.shrink;
        }
        let Some((trial, e, t)) = accepted else { break };
        let moved = dir.values().map(|d| t * norm2(*d).sqrt()).fold(0.0, f64::max);
        debug_assert!(e <= energy);
        snakes = trial;
        energy = e;
        energies.push(e);
        iterations += 1;
        step = t * 2.0;
        if moved < policy.tolerance {
            break;
        }
    }
    SmoothReport {
        snakes,
        iterations,
        energies,
    }
}

/// Rotates the first interior point next to each junction so that arms
/// within `threshold_deg` of a right angle to the junction's first arm land
/// on it exactly. Pinned points are never moved.
pub fn snap_right_angles(snakes: &mut [Snake], threshold_deg: f64) {
    // arms: junction vertex -> (snake, index of the point next to it)
    let mut arms: BTreeMap<VertexId, Vec<(usize, usize, usize)>> = BTreeMap::new();
    for (s, snake) in snakes.iter().enumerate() {
        let n = snake.len();
        if snake.closed || n < 3 {
            continue;
        }
        for (end, next) in [(0, 1), (n - 1, n - 2)] {
            if let Some(v) = snake.vertices[end] {
                arms.entry(v).or_default().push((s, end, next));
            }
        }
    }
    for list in arms.values() {
        if list.len() < 3 {
            continue;
        }
        let (s0, e0, n0) = list[0];
        let c = snakes[s0].points[e0];
        let p0 = snakes[s0].points[n0];
        let base = (p0[1] - c[1]).atan2(p0[0] - c[0]);
        for &(s, e, nx) in &list[1..] {
            if snakes[s].is_pinned(nx) {
                continue;
            }
            let c = snakes[s].points[e];
            let p = snakes[s].points[nx];
            let r = norm2([p[0] - c[0], p[1] - c[1]]).sqrt();
            let ang = (p[1] - c[1]).atan2(p[0] - c[0]);
            let rel = ang - base;
            let quarter = std::f64::consts::FRAC_PI_2;
            let target = (rel / quarter).round() * quarter;
            let diff = rel - target;
            if diff != 0.0 && diff.abs() <= threshold_deg.to_radians() {
                let a = base + target;
                snakes[s].points[nx] = [c[0] + r * a.cos(), c[1] + r * a.sin()];
            }
        }
    }
}

/// New positions for the mesh vertices that lie on snakes.
pub fn apply_to_positions(snakes: &[Snake], positions: &mut [Point]) {
    for s in snakes {
        for (i, v) in s.vertices.iter().enumerate() {
            if let Some(v) = v {
                if let Some(p) = positions.get_mut(*v) {
                    *p = s.points[i];
                }
            }
        }
    }
}

/// Largest turning angle between consecutive segments, in degrees.
pub fn max_turning_angle(snake: &Snake) -> f64 {
    let n = snake.len();
    let idx: Vec<usize> = if snake.closed { (0..n).collect() } else { (1..n.saturating_sub(1)).collect() };
    idx.into_iter()
        .map(|i| {
            let a = snake.points[(i + n - 1) % n];
            let b = snake.points[i];
            let c = snake.points[(i + 1) % n];
            let d1 = [b[0] - a[0], b[1] - a[1]];
            let d2 = [c[0] - b[0], c[1] - b[1]];
            (d1[0] * d2[1] - d1[1] * d2[0]).atan2(d1[0] * d2[0] + d1[1] * d2[1]).abs().to_degrees()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::testutil::grid;

    const STIFF: SnakeWeights = SnakeWeights {
        alpha: 0.0,
        beta: 1.0,
        gamma: 0.0,
    };

    #[test]
    fn straight_snake_has_no_stiffness() {
        let s = Snake::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], false, SnakeWeights::TOP).unwrap();
        let (_, st, inertia) = energy_terms(&s);
        assert_eq!(st, 0.0);
        assert_eq!(inertia, 0.0);
    }

    #[test]
    fn elbow_energy_by_hand() {
        let s = Snake::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], false, STIFF).unwrap();
        // h = 1/2, every point sees the second difference (-1, 1) / h^2
        let d2 = 2.0 * 16.0;
        let expect = d2 * (0.25 + 0.5 + 0.25);
        assert!((snake_energy(&s) - expect).abs() < 1e-12);
    }

    #[test]
    fn chain_of_three_edges() {
        let m = grid(3, 1);
        let active: BTreeSet<EdgeId> = [[0, 1], [1, 2], [2, 3]].iter().map(|p| m.edge_between(p[0], p[1]).unwrap()).collect();
        let s = extract_snakes(&m, &active, SnakeWeights::TOP, 0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 4);
        let s = extract_snakes(&m, &active, SnakeWeights::TOP, 2).unwrap();
        assert_eq!(s[0].len(), 13);
    }

    #[test]
    fn cycle_becomes_closed_snake() {
        let m = grid(1, 1);
        let s = extract_snakes(&m, &(0..4).collect(), SnakeWeights::TOP, 0).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].closed);
        assert_eq!(s[0].len(), 4);
    }

    #[test]
    fn inertia_only_returns_home() {
        let w = SnakeWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
        };
        let mut s = Snake::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], false, w).unwrap();
        s.points[1] = [1.0, 0.5];
        let r = smooth(&[s], &StepPolicy::default());
        assert!((r.snakes[0].points[1][1]).abs() < 1e-5);
        assert!(r.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_weights_do_nothing() {
        let w = SnakeWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let s = Snake::new(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], false, w).unwrap();
        let r = smooth(std::slice::from_ref(&s), &StepPolicy::default());
        assert_eq!(r.iterations, 0);
        assert_eq!(r.snakes[0], s);
    }

    #[test]
    fn weights_by_level() {
        assert_eq!(SnakeWeights::for_level(0, 3), SnakeWeights::TOP);
        assert_eq!(SnakeWeights::for_level(2, 3), SnakeWeights::BOTTOM);
        assert_eq!(SnakeWeights::for_level(1, 3).beta, 2.5);
    }
}
