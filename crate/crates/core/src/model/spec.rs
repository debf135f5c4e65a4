use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::VertexId;

/// How a local feature is treated: omitted, added to the objective, or banned.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub enum Policy {
    #[default]
    Allowed,
    Penalized(f64),
    Forbidden,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolicyRepr {
    Word(String),
    Weight(f64),
}

impl TryFrom<PolicyRepr> for Policy {
    type Error = String;

    fn try_from(r: PolicyRepr) -> std::result::Result<Self, String> {
        match r {
            PolicyRepr::Word(w) => match w.as_str() {
                "allowed" | "Y" => Ok(Policy::Allowed),
                "forbidden" | "inf" | "N" => Ok(Policy::Forbidden),
                other => Err(format!("unknown policy {other:?} (use allowed, forbidden, inf or a weight)")),
            },
            PolicyRepr::Weight(w) if w.is_infinite() && w > 0.0 => Ok(Policy::Forbidden),
            PolicyRepr::Weight(w) if !(w >= 0.0) || !w.is_finite() => Err(format!("policy weight {w} must be >= 0")),
            PolicyRepr::Weight(w) if w == 0.0 => Ok(Policy::Allowed),
            PolicyRepr::Weight(w) => Ok(Policy::Penalized(w)),
        }
    }
}

impl From<Policy> for PolicyRepr {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Allowed => PolicyRepr::Word("allowed".into()),
            Policy::Forbidden => PolicyRepr::Word("forbidden".into()),
            Policy::Penalized(w) => PolicyRepr::Weight(w),
        }
    }
}

impl Policy {
    pub fn is_forbidden(self) -> bool {
        self == Policy::Forbidden
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "SinkRepr", into = "SinkRepr")]
pub enum SinkSelection {
    /// Use the sinks listed in the mesh document.
    #[default]
    Mesh,
    AllBoundary,
    Vertices(Vec<VertexId>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SinkRepr {
    Word(String),
    List(Vec<VertexId>),
}

impl TryFrom<SinkRepr> for SinkSelection {
    type Error = String;

    fn try_from(r: SinkRepr) -> std::result::Result<Self, String> {
        match r {
            SinkRepr::Word(w) if w == "mesh" => Ok(SinkSelection::Mesh),
            SinkRepr::Word(w) if w == "all-boundary" => Ok(SinkSelection::AllBoundary),
            SinkRepr::Word(w) => Err(format!("unknown sink selection {w:?} (use mesh, all-boundary or a list)")),
            SinkRepr::List(v) => Ok(SinkSelection::Vertices(v)),
        }
    }
}

impl From<SinkSelection> for SinkRepr {
    fn from(s: SinkSelection) -> Self {
        match s {
            SinkSelection::Mesh => SinkRepr::Word("mesh".into()),
            SinkSelection::AllBoundary => SinkRepr::Word("all-boundary".into()),
            SinkSelection::Vertices(v) => SinkRepr::List(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioMode {
    #[default]
    Network,
    Floorplan,
    Gamelevel,
}

/// Constant used for the distance big-M rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BigM {
    /// Sum of all half-edge lengths.
    #[default]
    Full,
    /// Sum of all half-edge lengths minus the shortest one.
    Tight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointToPoint {
    pub enabled: bool,
    pub tolerance: usize,
    pub seed: u64,
}

impl Default for PointToPoint {
    fn default() -> Self {
        PointToPoint {
            enabled: false,
            tolerance: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedRoute {
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fixings {
    pub active_edges: Vec<[VertexId; 2]>,
    pub inactive_edges: Vec<[VertexId; 2]>,
    pub active_vertices: Vec<VertexId>,
    pub inactive_vertices: Vec<VertexId>,
}

/// One undesirable local configuration anchored at a half-edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PatternShape {
    /// Follow the half-edge, then take the listed turns (`L`, `R`, `S`).
    Turns(Vec<super::Turn>),
    /// The half-edge's edge plus the opposite edge of an incident quad.
    FaceOpposite,
}

impl TryFrom<String> for PatternShape {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "opposite" {
            return Ok(PatternShape::FaceOpposite);
        }
        let turns = s
            .chars()
            .map(|c| match c {
                'L' => Ok(super::Turn::Left),
                'R' => Ok(super::Turn::Right),
                'S' => Ok(super::Turn::Straight),
                other => Err(format!("unknown turn {other:?} in pattern {s:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if turns.is_empty() {
            return Err("empty pattern".into());
        }
        Ok(PatternShape::Turns(turns))
    }
}

impl From<PatternShape> for String {
    fn from(p: PatternShape) -> String {
        match p {
            PatternShape::FaceOpposite => "opposite".into(),
            PatternShape::Turns(t) => t
                .iter()
                .map(|t| match t {
                    super::Turn::Left => 'L',
                    super::Turn::Right => 'R',
                    super::Turn::Straight => 'S',
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternLibrary {
    pub zigzag: Vec<PatternShape>,
    pub proximity: Vec<PatternShape>,
}

impl Default for PatternLibrary {
    fn default() -> Self {
        use super::Turn::{Left, Right};
        PatternLibrary {
            zigzag: vec![PatternShape::Turns(vec![Left, Right]), PatternShape::Turns(vec![Right, Left])],
            proximity: vec![PatternShape::FaceOpposite],
        }
    }
}

/// Declarative design intent for one network solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalSpec {
    pub mode: ScenarioMode,
    /// Hop radius within which an active vertex covers others.
    pub coverage_radius: usize,
    pub lambda_length: f64,
    pub lambda_distance: f64,
    pub dead_ends: Policy,
    pub branches: Policy,
    pub zigzag: Policy,
    pub proximity: Policy,
    pub t_junctions: Policy,
    pub sinks: SinkSelection,
    /// Excluded boundary edges are fixed inactive. Defaults to `true` in
    /// network mode and `false` otherwise.
    pub exclude_boundary: Option<bool>,
    pub point_to_point: PointToPoint,
    pub forced_routes: Vec<ForcedRoute>,
    pub fixings: Fixings,
    pub patterns: PatternLibrary,
    pub big_m: BigM,
}

impl Default for FunctionalSpec {
    fn default() -> Self {
        FunctionalSpec {
            mode: ScenarioMode::Network,
            coverage_radius: 1,
            lambda_length: 1.0,
            lambda_distance: 0.0,
            dead_ends: Policy::Allowed,
            branches: Policy::Allowed,
            zigzag: Policy::Allowed,
            proximity: Policy::Allowed,
            t_junctions: Policy::Allowed,
            sinks: SinkSelection::Mesh,
            exclude_boundary: None,
            point_to_point: PointToPoint::default(),
            forced_routes: Vec::new(),
            fixings: Fixings::default(),
            patterns: PatternLibrary::default(),
            big_m: BigM::Full,
        }
    }
}

impl FunctionalSpec {
    pub fn from_toml(text: &str) -> Result<FunctionalSpec> {
        let spec: FunctionalSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [("lambda_length", self.lambda_length), ("lambda_distance", self.lambda_distance)];
        for (name, w) in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} must be a finite weight >= 0")));
            }
        }
        for r in &self.forced_routes {
            if r.from == r.to {
                return Err(Error::InvalidSpec(format!("forced route {} -> {} is empty", r.from, r.to)));
            }
        }
        Ok(())
    }

    pub fn excludes_boundary(&self) -> bool {
        self.exclude_boundary.unwrap_or(self.mode == ScenarioMode::Network)
    }
}
