//! Domain model for polygonal and curvilinear domains with conical points
//! and cracks: parsing, cone bases, crack classification, unfolding and the
//! desingularized boundary.

mod curve;
mod unfold;

pub use curve::{Curve, Point};
pub use unfold::{
    desingularize_boundary, desingularize_domain, smoothed_distance, unfold, Collar, CollarLabel,
    DesingularizedBoundary, SmoothPatch, SmoothedDistance, UVertex, UVertexKind, UnfoldedDomain,
};
pub(crate) use curve::{dot, left_normal, norm, sub};
pub(crate) use unfold::smoothed_distance_near;

use curve::{cross, polylines_cross, wrap_angle};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use thiserror::Error;

/// Angles closer than this to π are treated as flat.
pub const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("boundary is self-intersecting: edges {0} and {1} cross")]
    SelfIntersection(String, String),
    #[error("vertex {0} has a cone base of zero measure")]
    ZeroMeasureCone(String),
    #[error("neighborhoods of vertices {0} and {1} overlap")]
    OverlappingNeighborhoods(String, String),
    #[error("vertex {0} is flat (interior angle π between straight edges)")]
    FlatVertex(String),
    #[error("domain has unresolved cracks; unfold it first")]
    UnresolvedCracks,
    #[error("angle {0} is outside (0, 2π)")]
    AngleOutOfRange(f64),
}

// ---------------------------------------------------------------------------
// Input document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub options: DomainOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Line,
    Arc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcParams {
    pub center: [f64; 2],
    /// Direction of travel from `from` to `to`.
    #[serde(default = "default_true")]
    pub ccw: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ArcParams>,
    #[serde(default)]
    pub crack: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainOptions {
    /// Collar cutoff overrides keyed by vertex id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub epsilon: BTreeMap<String, f64>,
    /// Plateau of the smoothed distance when the domain has no conical points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plateau: Option<f64>,
}

impl DomainSpec {
    /// Closed polygon through `points` in order.
    pub fn polygon(points: &[Point]) -> Self {
        let n = points.len();
        let vertices = points
            .iter()
            .enumerate()
            .map(|(i, p)| VertexSpec { id: format!("v{i}"), x: p[0], y: p[1] })
            .collect();
        let edges = (0..n)
            .map(|i| EdgeSpec {
                id: format!("e{i}"),
                from: format!("v{i}"),
                to: format!("v{}", (i + 1) % n),
                kind: EdgeKind::Line,
                params: None,
                crack: false,
            })
            .collect();
        DomainSpec { vertices, edges, options: DomainOptions::default() }
    }

    /// Regular n-gon inscribed in the unit circle.
    pub fn regular_polygon(n: usize) -> Self {
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        Self::polygon(&pts)
    }

    pub fn unit_square() -> Self {
        Self::polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    }

    pub fn l_shape() -> Self {
        Self::polygon(&[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
    }

    /// Circle of the given radius carrying one (smooth) marker vertex.
    pub fn circle(radius: f64) -> Self {
        DomainSpec {
            vertices: vec![VertexSpec { id: "o".into(), x: radius, y: 0.0 }],
            edges: vec![EdgeSpec {
                id: "arc".into(),
                from: "o".into(),
                to: "o".into(),
                kind: EdgeKind::Arc,
                params: Some(ArcParams { center: [0.0, 0.0], ccw: true }),
                crack: false,
            }],
            options: DomainOptions::default(),
        }
    }

    pub fn add_crack(&mut self, id: &str, from: &str, to: &str) {
        self.edges.push(EdgeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            kind: EdgeKind::Line,
            params: None,
            crack: true,
        });
    }

    pub fn add_vertex(&mut self, id: &str, p: Point) {
        self.vertices.push(VertexSpec { id: id.into(), x: p[0], y: p[1] });
    }
}

// ---------------------------------------------------------------------------
// Validated domain

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    NonCrackConical,
    InnerCrack,
    OuterCrack,
    ConicalCrack,
    SmoothBoundary,
}

impl VertexClass {
    pub fn is_crack(self) -> bool {
        matches!(self, VertexClass::InnerCrack | VertexClass::OuterCrack | VertexClass::ConicalCrack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub curve: Curve,
    pub crack: bool,
}

/// One side of an edge as seen from the domain. Crack edges carry two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPiece {
    pub edge: usize,
    /// Outer normal is `normal_sign` times the left normal of the tangent.
    pub normal_sign: f64,
}

/// An edge leaving a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeEnd {
    pub edge: usize,
    pub at_start: bool,
    pub direction: Point,
    pub angle: f64,
    pub crack: bool,
}

/// A boundary side bounding one component of a cone base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorSide {
    pub piece: usize,
    pub edge: usize,
    pub at_start: bool,
    pub crack: bool,
    /// Unit direction of the edge leaving the vertex.
    pub direction: Point,
    /// Outer normal of the piece at the vertex.
    pub normal: Point,
}

/// Component of a cone base: the open sector swept counterclockwise from
/// `first.direction` through `width` radians to `second.direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularInterval {
    pub start: f64,
    pub width: f64,
    pub first: SectorSide,
    pub second: SectorSide,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vertex {
    pub id: String,
    pub position: Point,
    pub edge_ends: Vec<EdgeEnd>,
    pub cone_base: Vec<AngularInterval>,
    pub classification: VertexClass,
    pub ramification: usize,
    /// Collar cutoff.
    pub epsilon: f64,
}

impl Vertex {
    /// Components of the cone base adjacent to a crack ray (the crack part).
    pub fn crack_part(&self) -> Vec<AngularInterval> {
        self.cone_base.iter().filter(|s| s.first.crack || s.second.crack).copied().collect()
    }

    /// Components not adjacent to any crack ray.
    pub fn non_crack_part(&self) -> Vec<AngularInterval> {
        self.cone_base.iter().filter(|s| !s.first.crack && !s.second.crack).copied().collect()
    }

    /// Whether the vertex is a singular point of the boundary.
    pub fn is_conical(&self) -> bool {
        self.classification != VertexClass::SmoothBoundary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicalDomain {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub pieces: Vec<BoundaryPiece>,
    /// Constant value of the smoothed distance away from all collars.
    pub plateau: f64,
    pub hash: String,
    pub dimension: usize,
    #[serde(skip)]
    pub spec: DomainSpec,
}

impl ConicalDomain {
    pub fn has_cracks(&self) -> bool {
        self.edges.iter().any(|e| e.crack)
    }

    pub fn crack_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| self.edges[i].crack).collect()
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Outer unit normal of a piece at arclength `s`.
    pub fn piece_normal(&self, piece: usize, s: f64) -> Point {
        let p = self.pieces[piece];
        let t = self.edges[p.edge].curve.tangent(s);
        let n = left_normal(t);
        [p.normal_sign * n[0], p.normal_sign * n[1]]
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|p| self.edges[p.edge].curve.length()).sum()
    }

    /// Even-odd inside test against the non-crack boundary.
    pub fn contains(&self, p: Point) -> bool {
        inside(&self.edges, p)
    }

    /// Distance from `p` to the closest boundary point (polyline estimate for arcs).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let mut best = f64::INFINITY;
        for e in &self.edges {
            let pts = e.curve.polyline(2048);
            for w in pts.windows(2) {
                best = best.min(point_segment_distance(p, w[0], w[1]));
            }
        }
        best
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = dot(ab, ab);
    let t = if l2 > 0.0 { (dot(sub(p, a), ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1]]))
}

fn inside(edges: &[Edge], p: Point) -> bool {
    // ray in a generic direction to avoid passing through vertices
    let dir = [0.913_545_457_642_600_9_f64, 0.406_736_643_075_800_2_f64];
    let mut count = 0usize;
    for e in edges.iter().filter(|e| !e.crack) {
        let pts = e.curve.polyline(2048);
        for w in pts.windows(2) {
            let a = sub(w[0], p);
            let b = sub(w[1], p);
            let denom = cross(dir, sub(b, a));
            if denom.abs() < 1e-300 {
                continue;
            }
            // p + t dir = a + u (b - a)
            let t = cross(a, sub(b, a)) / denom;
            let u = cross(a, dir) / denom;
            if t > 0.0 && (0.0..1.0).contains(&u) {
                count += 1;
            }
        }
    }
    count % 2 == 1
}

/// Parse and validate a domain document (JSON).
pub fn parse_domain(text: &str) -> Result<ConicalDomain, GeometryError> {
    let spec: DomainSpec =
        serde_json::from_str(text).map_err(|e| GeometryError::Schema(e.to_string()))?;
    ConicalDomain::from_spec(spec)
}

impl ConicalDomain {
    pub fn from_spec(spec: DomainSpec) -> Result<Self, GeometryError> {
        let schema = |m: String| GeometryError::Schema(m);
        if spec.vertices.is_empty() || spec.edges.is_empty() {
            return Err(schema("domain needs vertices and edges".into()));
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, v) in spec.vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(schema(format!("vertex {} has non-finite coordinates", v.id)));
            }
            if index.insert(v.id.as_str(), i).is_some() {
                return Err(schema(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut edge_ids = HashMap::new();
        let mut edges = Vec::with_capacity(spec.edges.len());
        for e in &spec.edges {
            if edge_ids.insert(e.id.as_str(), ()).is_some() {
                return Err(schema(format!("duplicate edge id {}", e.id)));
            }
            let from = *index
                .get(e.from.as_str())
                .ok_or_else(|| schema(format!("edge {} references unknown vertex {}", e.id, e.from)))?;
            let to = *index
                .get(e.to.as_str())
                .ok_or_else(|| schema(format!("edge {} references unknown vertex {}", e.id, e.to)))?;
            let a = [spec.vertices[from].x, spec.vertices[from].y];
            let b = [spec.vertices[to].x, spec.vertices[to].y];
            let curve = match e.kind {
                EdgeKind::Line => {
                    if e.params.is_some() {
                        return Err(schema(format!("line edge {} takes no params", e.id)));
                    }
                    if norm(sub(b, a)) <= 0.0 {
                        return Err(schema(format!("edge {} has zero length", e.id)));
                    }
                    Curve::Line { start: a, end: b }
                }
                EdgeKind::Arc => {
                    let p = e
                        .params
                        .as_ref()
                        .ok_or_else(|| schema(format!("arc edge {} needs params.center", e.id)))?;
                    let c = p.center;
                    let ra = norm(sub(a, c));
                    let rb = norm(sub(b, c));
                    if ra <= 0.0 || (ra - rb).abs() > 1e-9 * ra.max(1.0) {
                        return Err(schema(format!("arc edge {} endpoints not on a common circle", e.id)));
                    }
                    let t0 = (a[1] - c[1]).atan2(a[0] - c[0]);
                    let t1 = (b[1] - c[1]).atan2(b[0] - c[0]);
                    let mut sweep = wrap_angle(t1 - t0);
                    if sweep < 1e-14 {
                        sweep = 2.0 * PI;
                    }
                    if !p.ccw {
                        sweep -= 2.0 * PI;
                        if sweep > -1e-14 {
                            sweep = -2.0 * PI;
                        }
                    }
                    Curve::Arc { center: c, radius: ra, start_angle: t0, sweep }
                }
            };
            if e.kind == EdgeKind::Line && from == to {
                return Err(schema(format!("line edge {} is a loop", e.id)));
            }
            edges.push(Edge { id: e.id.clone(), from, to, curve, crack: e.crack });
        }

        // closedness: even number of non-crack edge-ends at every vertex
        let mut valence = vec![0usize; spec.vertices.len()];
        let mut any = vec![false; spec.vertices.len()];
        for e in &edges {
            any[e.from] = true;
            any[e.to] = true;
            if !e.crack {
                valence[e.from] += 1;
                valence[e.to] += 1;
            }
        }
        for (i, v) in spec.vertices.iter().enumerate() {
            if !any[i] {
                return Err(schema(format!("vertex {} lies on no edge", v.id)));
            }
            if valence[i] % 2 == 1 {
                return Err(schema(format!("non-crack boundary is not closed at vertex {}", v.id)));
            }
        }
        if !edges.iter().any(|e| !e.crack) {
            return Err(schema("domain has no non-crack boundary".into()));
        }

        // self-intersection
        let polys: Vec<Vec<Point>> = edges.iter().map(|e| e.curve.polyline(512)).collect();
        for i in 0..edges.len() {
            for j in (i + 1)..edges.len() {
                if polylines_cross(&polys[i], &polys[j]) {
                    return Err(GeometryError::SelfIntersection(edges[i].id.clone(), edges[j].id.clone()));
                }
            }
        }

        // pieces
        let mut pieces = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            if e.crack {
                pieces.push(BoundaryPiece { edge: k, normal_sign: 1.0 });
                pieces.push(BoundaryPiece { edge: k, normal_sign: -1.0 });
                continue;
            }
            let l = e.curve.length();
            let m = e.curve.point(0.5 * l);
            let n = left_normal(e.curve.tangent(0.5 * l));
            let h = 1e-7 * l.max(1e-3);
            let left_in = inside(&edges, [m[0] + h * n[0], m[1] + h * n[1]]);
            let right_in = inside(&edges, [m[0] - h * n[0], m[1] - h * n[1]]);
            let sign = match (left_in, right_in) {
                (true, false) => -1.0,
                (false, true) => 1.0,
                _ => return Err(schema(format!("edge {} does not separate inside from outside", e.id))),
            };
            pieces.push(BoundaryPiece { edge: k, normal_sign: sign });
        }

        let positions: Vec<Point> = spec.vertices.iter().map(|v| [v.x, v.y]).collect();
        let mut vertices = Vec::with_capacity(positions.len());
        for (i, vs) in spec.vertices.iter().enumerate() {
            vertices.push(analyze_vertex(i, &vs.id, positions[i], &edges, &pieces)?);
        }

        // collar cutoffs
        for i in 0..vertices.len() {
            let shortest = edges
                .iter()
                .filter(|e| e.from == i || e.to == i)
                .map(|e| e.curve.length())
                .fold(f64::INFINITY, f64::min);
            let nearest = (0..positions.len())
                .filter(|&j| j != i)
                .map(|j| norm(sub(positions[i], positions[j])))
                .fold(f64::INFINITY, f64::min);
            let mut eps = 0.25 * shortest.min(nearest);
            if let Some(&o) = spec.options.epsilon.get(&vertices[i].id) {
                if !(o > 0.0 && o.is_finite()) {
                    return Err(schema(format!("epsilon override for {} must be positive", vertices[i].id)));
                }
                eps = o;
            }
            vertices[i].epsilon = eps;
        }
        for (k, id) in spec.options.epsilon.keys().enumerate() {
            if !index.contains_key(id.as_str()) {
                return Err(schema(format!("epsilon override {k} names unknown vertex {id}")));
            }
        }
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                if !vertices[i].is_conical() || !vertices[j].is_conical() {
                    continue;
                }
                let d = norm(sub(positions[i], positions[j]));
                if vertices[i].epsilon + vertices[j].epsilon >= d {
                    return Err(GeometryError::OverlappingNeighborhoods(
                        vertices[i].id.clone(),
                        vertices[j].id.clone(),
                    ));
                }
            }
        }
        let conical_eps: Vec<f64> =
            vertices.iter().filter(|v| v.is_conical()).map(|v| v.epsilon).collect();
        let plateau = if conical_eps.is_empty() {
            spec.options.plateau.unwrap_or(1.0)
        } else {
            conical_eps.iter().copied().fold(f64::INFINITY, f64::min)
        };

        let canonical = serde_json::to_string(&spec).expect("spec serializes");
        let hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();

        Ok(ConicalDomain { vertices, edges, pieces, plateau, hash, dimension: 2, spec })
    }
}

fn analyze_vertex(
    vi: usize,
    id: &str,
    pos: Point,
    edges: &[Edge],
    pieces: &[BoundaryPiece],
) -> Result<Vertex, GeometryError> {
    let mut ends = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        let l = e.curve.length();
        if e.from == vi {
            let d = e.curve.tangent(0.0);
            ends.push(EdgeEnd { edge: k, at_start: true, direction: d, angle: wrap_angle(d[1].atan2(d[0])), crack: e.crack });
        }
        if e.to == vi {
            let t = e.curve.tangent(l);
            let d = [-t[0], -t[1]];
            ends.push(EdgeEnd { edge: k, at_start: false, direction: d, angle: wrap_angle(d[1].atan2(d[0])), crack: e.crack });
        }
    }
    ends.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    let n = ends.len();
    for i in 0..n {
        let j = (i + 1) % n;
        if n > 1 {
            let gap = wrap_angle(ends[j].angle - ends[i].angle);
            if gap < 1e-12 || 2.0 * PI - gap < 1e-12 {
                return Err(GeometryError::ZeroMeasureCone(id.to_string()));
            }
        }
    }
    let shortest = ends.iter().map(|e| edges[e.edge].curve.length()).fold(f64::INFINITY, f64::min);
    let probe = 1e-4 * shortest;

    let piece_of = |edge: usize, sign: f64| -> usize {
        pieces
            .iter()
            .position(|p| p.edge == edge && (!edges[edge].crack || p.normal_sign == sign))
            .expect("piece exists")
    };

    let mut cone = Vec::new();
    for i in 0..n {
        let a = ends[i];
        let b = ends[(i + 1) % n];
        let width = if n == 1 { 2.0 * PI } else { wrap_angle(b.angle - a.angle) };
        let mid = a.angle + 0.5 * width;
        // probe along the bisector; curved edges bend away at second order
        let p = [pos[0] + probe * mid.cos(), pos[1] + probe * mid.sin()];
        if !inside(edges, p) {
            continue;
        }
        let side = |e: EdgeEnd, is_first: bool| -> Result<SectorSide, GeometryError> {
            let sign = match (is_first, e.at_start) {
                (true, true) => -1.0,
                (true, false) => 1.0,
                (false, true) => 1.0,
                (false, false) => -1.0,
            };
            let pc = piece_of(e.edge, sign);
            if pieces[pc].normal_sign != sign {
                return Err(GeometryError::SelfIntersection(edges[e.edge].id.clone(), id.to_string()));
            }
            let l = edges[e.edge].curve.length();
            let t = edges[e.edge].curve.tangent(if e.at_start { 0.0 } else { l });
            let ln = left_normal(t);
            Ok(SectorSide {
                piece: pc,
                edge: e.edge,
                at_start: e.at_start,
                crack: e.crack,
                direction: e.direction,
                normal: [sign * ln[0], sign * ln[1]],
            })
        };
        cone.push(AngularInterval { start: a.angle, width, first: side(a, true)?, second: side(b, false)? });
    }
    if cone.is_empty() {
        return Err(GeometryError::ZeroMeasureCone(id.to_string()));
    }

    let has_crack = ends.iter().any(|e| e.crack);
    let total: f64 = cone.iter().map(|s| s.width).sum();
    let all_straight = ends.iter().all(|e| edges[e.edge].curve.is_straight());
    let (classification, ramification) = if !has_crack {
        let straight_angle = cone.len() == 1 && n == 2 && (cone[0].width - PI).abs() < FLAT_TOL;
        if straight_angle && all_straight {
            return Err(GeometryError::FlatVertex(id.to_string()));
        } else if straight_angle {
            // an arc continuing tangentially: a marker on a smooth curve
            (VertexClass::SmoothBoundary, 1)
        } else {
            (VertexClass::NonCrackConical, cone.len())
        }
    } else if cone.len() == n {
        // every sector lies inside: closure is the full circle
        (VertexClass::InnerCrack, cone.len())
    } else {
        let crack_part = cone.iter().filter(|s| s.first.crack || s.second.crack).count();
        let non_crack = cone.len() - crack_part;
        let clusters = crack_clusters(&cone);
        if non_crack == 0 && clusters == 1 && (total - PI).abs() < 1e-9 {
            (VertexClass::OuterCrack, cone.len())
        } else {
            (VertexClass::ConicalCrack, crack_part + usize::from(non_crack > 0))
        }
    };

    Ok(Vertex {
        id: id.to_string(),
        position: pos,
        edge_ends: ends,
        cone_base: cone,
        classification,
        ramification,
        epsilon: 0.0,
    })
}

/// Number of closure components of the crack part (sectors glued across crack rays).
fn crack_clusters(cone: &[AngularInterval]) -> usize {
    let crack: Vec<&AngularInterval> = cone.iter().filter(|s| s.first.crack || s.second.crack).collect();
    if crack.is_empty() {
        return 0;
    }
    // union-find on sectors sharing a crack edge-end
    let n = crack.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            let s = crack[i];
            let t = crack[j];
            if s.second.crack && t.first.crack && s.second.edge == t.first.edge && s.second.at_start == t.first.at_start {
                let a = find(&mut parent, i);
                let b = find(&mut parent, j);
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Interior angles per vertex: the measure of each component of the cone base.
/// Smooth boundary points are omitted.
pub fn interior_angles(d: &ConicalDomain) -> Vec<(String, Vec<f64>)> {
    d.vertices
        .iter()
        .filter(|v| v.is_conical())
        .map(|v| (v.id.clone(), v.cone_base.iter().map(|s| s.width).collect()))
        .collect()
}

/// `min(π/θ, π/(2π−θ))` over all listed angles.
pub fn theta0(angles: &[f64]) -> Result<f64, GeometryError> {
    let mut best = f64::INFINITY;
    for &t in angles {
        if !(t > 0.0 && t < 2.0 * PI) {
            return Err(GeometryError::AngleOutOfRange(t));
        }
        best = best.min(PI / t).min(PI / (2.0 * PI - t));
    }
    if angles.is_empty() {
        return Err(GeometryError::Schema("theta0 needs at least one angle".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom(spec: DomainSpec) -> ConicalDomain {
        ConicalDomain::from_spec(spec).unwrap()
    }

    #[test]
    fn square_has_four_right_angles() {
        let d = dom(DomainSpec::unit_square());
        assert_eq!(d.vertices.len(), 4);
        for v in &d.vertices {
            assert_eq!(v.cone_base.len(), 1);
            assert!((v.cone_base[0].width - PI / 2.0).abs() < 1e-14);
            assert_eq!(v.classification, VertexClass::NonCrackConical);
            assert!((v.epsilon - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn outer_normals_point_outward() {
        let d = dom(DomainSpec::unit_square());
        for (k, p) in d.pieces.iter().enumerate() {
            let c = &d.edges[p.edge].curve;
            let m = c.point(0.5 * c.length());
            let n = d.piece_normal(k, 0.5 * c.length());
            assert!(!d.contains([m[0] + 1e-3 * n[0], m[1] + 1e-3 * n[1]]));
        }
    }

    #[test]
    fn orientation_does_not_matter() {
        let mut s = DomainSpec::unit_square();
        s.vertices.reverse();
        let e = &mut s.edges[1];
        std::mem::swap(&mut e.from, &mut e.to);
        let d = dom(s);
        for v in &d.vertices {
            assert!((v.cone_base[0].width - PI / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn l_shape_angles() {
        let d = dom(DomainSpec::l_shape());
        let mut angles: Vec<f64> = interior_angles(&d).into_iter().flat_map(|(_, a)| a).collect();
        angles.sort_by(f64::total_cmp);
        for a in &angles[..5] {
            assert!((a - PI / 2.0).abs() < 1e-14);
        }
        assert!((angles[5] - 1.5 * PI).abs() < 1e-14);
    }

    #[test]
    fn theta0_examples() {
        assert!((theta0(&[PI / 2.0; 4]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((theta0(&[1.5 * PI, PI / 2.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((theta0(&[PI]).unwrap() - 1.0).abs() < 1e-15);
        assert!(theta0(&[2.0 * PI]).is_err());
        assert!(theta0(&[0.0]).is_err());
    }

    #[test]
    fn flat_vertex_rejected() {
        let s = DomainSpec::polygon(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]]);
        assert!(matches!(ConicalDomain::from_spec(s), Err(GeometryError::FlatVertex(_))));
    }

    #[test]
    fn self_intersection_rejected() {
        let s = DomainSpec::polygon(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(ConicalDomain::from_spec(s), Err(GeometryError::SelfIntersection(..))));
    }

    #[test]
    fn overlapping_overrides_rejected() {
        let mut s = DomainSpec::unit_square();
        s.options.epsilon.insert("v0".into(), 0.6);
        s.options.epsilon.insert("v1".into(), 0.6);
        assert!(matches!(
            ConicalDomain::from_spec(s),
            Err(GeometryError::OverlappingNeighborhoods(..))
        ));
    }

    #[test]
    fn circle_marker_is_smooth() {
        let d = dom(DomainSpec::circle(1.0));
        assert_eq!(d.vertices[0].classification, VertexClass::SmoothBoundary);
        assert!(interior_angles(&d).is_empty());
        assert_eq!(d.plateau, 1.0);
    }

    #[test]
    fn slit_disk_classification() {
        let mut s = DomainSpec::circle(1.0);
        s.add_vertex("c", [0.0, 0.0]);
        s.add_crack("k", "c", "o");
        let d = dom(s);
        let o = &d.vertices[d.vertex_index("o").unwrap()];
        let c = &d.vertices[d.vertex_index("c").unwrap()];
        assert_eq!(c.classification, VertexClass::InnerCrack);
        assert_eq!(c.ramification, 1);
        assert!((c.cone_base[0].width - 2.0 * PI).abs() < 1e-14);
        assert_eq!(o.classification, VertexClass::OuterCrack);
        assert_eq!(o.ramification, 2);
    }

    #[test]
    fn conical_crack_ramification() {
        // crack leaving a square corner along the diagonal
        let mut s = DomainSpec::unit_square();
        s.add_vertex("t", [0.5, 0.5]);
        s.add_crack("k", "v0", "t");
        let d = dom(s);
        let v = &d.vertices[0];
        assert_eq!(v.classification, VertexClass::ConicalCrack);
        assert_eq!(v.ramification, 2);
        assert!(v.non_crack_part().is_empty());
    }

    #[test]
    fn bad_documents() {
        assert!(matches!(parse_domain("{"), Err(GeometryError::Schema(_))));
        let open = r#"{"vertices":[{"id":"a","x":0,"y":0},{"id":"b","x":1,"y":0}],
                       "edges":[{"id":"e","from":"a","to":"b","kind":"line"}]}"#;
        assert!(matches!(parse_domain(open), Err(GeometryError::Schema(_))));
    }

    #[test]
    fn hash_is_stable() {
        let a = dom(DomainSpec::unit_square());
        let b = dom(DomainSpec::unit_square());
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
    }
}
