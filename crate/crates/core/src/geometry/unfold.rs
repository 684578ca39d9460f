use super::{AngularInterval, ConicalDomain, GeometryError, Point, SectorSide, VertexClass};
use super::{norm, sub};
use serde::Serialize;

/// A point of the boundary of the desingularized boundary: one edge-end at a vertex.
pub type CollarLabel = SectorSide;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UVertexKind {
    /// A conical point without cracks.
    NonCrack,
    /// The non-crack part of a conical crack point.
    CrackNonCrackPart,
    /// The k-th cover of a singular crack point.
    CrackCover { index: usize },
}

/// Vertex of the unfolded domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UVertex {
    pub base: usize,
    pub kind: UVertexKind,
    pub intervals: Vec<AngularInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfoldedDomain {
    pub base: ConicalDomain,
    pub vertices: Vec<UVertex>,
    /// Unfolded boundary piece → base edge.
    pub piece_cover: Vec<usize>,
    /// Singular crack points (indices into base vertices).
    pub crack_points: Vec<usize>,
    pub m: usize,
    pub m_prime: usize,
    /// Total ramification `Σ k_c − m′`.
    pub alpha: usize,
}

impl UnfoldedDomain {
    /// Number of unfolded pieces over a base edge.
    pub fn fiber_size(&self, edge: usize) -> usize {
        self.piece_cover.iter().filter(|&&e| e == edge).count()
    }

    pub fn is_identity_cover(&self) -> bool {
        self.crack_points.is_empty()
            && self.piece_cover.iter().enumerate().all(|(i, &e)| i == e)
            && self.vertices.iter().all(|v| v.kind == UVertexKind::NonCrack)
    }
}

/// Replace each crack by its two-sided cover and split singular crack points
/// into one vertex per approach direction.
pub fn unfold(d: &ConicalDomain) -> UnfoldedDomain {
    let mut vertices = Vec::new();
    let mut crack_points = Vec::new();
    let mut m_prime = 0;
    let mut alpha = 0;
    for (i, v) in d.vertices.iter().enumerate() {
        match v.classification {
            VertexClass::SmoothBoundary => {}
            VertexClass::NonCrackConical => {
                vertices.push(UVertex { base: i, kind: UVertexKind::NonCrack, intervals: v.cone_base.clone() })
            }
            VertexClass::InnerCrack | VertexClass::OuterCrack => {
                crack_points.push(i);
                alpha += v.ramification;
                for (k, s) in v.cone_base.iter().enumerate() {
                    vertices.push(UVertex { base: i, kind: UVertexKind::CrackCover { index: k }, intervals: vec![*s] });
                }
            }
            VertexClass::ConicalCrack => {
                crack_points.push(i);
                alpha += v.ramification;
                let nc = v.non_crack_part();
                if !nc.is_empty() {
                    m_prime += 1;
                    vertices.push(UVertex { base: i, kind: UVertexKind::CrackNonCrackPart, intervals: nc });
                }
                for (k, s) in v.crack_part().iter().enumerate() {
                    vertices.push(UVertex { base: i, kind: UVertexKind::CrackCover { index: k }, intervals: vec![*s] });
                }
            }
        }
    }
    let m = crack_points.len();
    UnfoldedDomain {
        base: d.clone(),
        vertices,
        piece_cover: d.pieces.iter().map(|p| p.edge).collect(),
        crack_points,
        m,
        m_prime,
        alpha: alpha - m_prime,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collar {
    /// Index into the unfolded vertex list.
    pub uvertex: usize,
    pub vertex_id: String,
    pub position: Point,
    /// The finite set ∂ω, two labels per cone-base component.
    pub labels: Vec<CollarLabel>,
    pub epsilon: f64,
}

/// Parameter range of a boundary piece lying outside every collar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothPatch {
    pub piece: usize,
    pub s_start: f64,
    pub s_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesingularizedBoundary {
    #[serde(skip)]
    pub domain: ConicalDomain,
    pub collars: Vec<Collar>,
    pub smooth_part: Vec<SmoothPatch>,
    /// (collar, label, piece, piece end at the vertex is its start).
    pub gluing: Vec<(usize, usize, usize, bool)>,
    /// Built from an unfolded cracked domain.
    pub unfolded: bool,
}

impl DesingularizedBoundary {
    /// Number of points of ∂M.
    pub fn boundary_points(&self) -> usize {
        self.collars.iter().map(|c| c.labels.len()).sum()
    }
}

/// Blow up every vertex of the unfolded domain into a collar.
pub fn desingularize_boundary(u: &UnfoldedDomain) -> DesingularizedBoundary {
    let d = &u.base;
    let mut collars = Vec::new();
    let mut gluing = Vec::new();
    for (k, uv) in u.vertices.iter().enumerate() {
        let v = &d.vertices[uv.base];
        let labels: Vec<CollarLabel> = uv.intervals.iter().flat_map(|s| [s.first, s.second]).collect();
        for (j, l) in labels.iter().enumerate() {
            gluing.push((collars.len(), j, l.piece, l.at_start));
        }
        collars.push(Collar { uvertex: k, vertex_id: v.id.clone(), position: v.position, labels, epsilon: v.epsilon });
    }
    let mut smooth_part = Vec::new();
    for (pi, p) in d.pieces.iter().enumerate() {
        let e = &d.edges[p.edge];
        let l = e.curve.length();
        let cut = |vi: usize| if d.vertices[vi].is_conical() { d.vertices[vi].epsilon } else { 0.0 };
        let (a, b) = (cut(e.from), l - cut(e.to));
        if b > a {
            smooth_part.push(SmoothPatch { piece: pi, s_start: a, s_end: b });
        }
    }
    DesingularizedBoundary { domain: d.clone(), collars, smooth_part, gluing, unfolded: !u.crack_points.is_empty() }
}

/// Desingularize a crack-free domain directly.
pub fn desingularize_domain(d: &ConicalDomain) -> Result<DesingularizedBoundary, GeometryError> {
    if d.has_cracks() {
        return Err(GeometryError::UnresolvedCracks);
    }
    Ok(desingularize_boundary(&unfold(d)))
}

/// Smoothed distance `r_Ω` as a function of the Euclidean distance to a
/// vertex with collar cutoff `eps`. Equal to the distance up to the blend
/// start, then bends (C², monotone, 1-Lipschitz) onto the plateau.
pub(crate) fn blend(dist: f64, eps: f64, plateau: f64) -> f64 {
    let s = (0.5 * eps).min(0.5 * plateau);
    let w = 2.0 * (plateau - s);
    if dist <= s {
        return dist;
    }
    if dist >= s + w {
        return plateau;
    }
    let x = (dist - s) / w;
    // ∫₀ˣ (1 − smoothstep₅)
    s + w * (x - 2.5 * x.powi(4) + 3.0 * x.powi(5) - x.powi(6))
}

/// Value of `r_Ω` at a boundary point together with whether it sits on a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedDistance {
    pub value: f64,
    pub at_vertex: bool,
}

pub fn smoothed_distance(d: &ConicalDomain, x: Point) -> SmoothedDistance {
    let mut best: Option<(f64, f64)> = None;
    for v in d.vertices.iter().filter(|v| v.is_conical()) {
        let r = norm(sub(x, v.position));
        if best.is_none_or(|(b, _)| r < b) {
            best = Some((r, v.epsilon));
        }
    }
    match best {
        None => SmoothedDistance { value: d.plateau, at_vertex: false },
        Some((r, eps)) => SmoothedDistance { value: blend(r, eps, d.plateau), at_vertex: r == 0.0 },
    }
}

/// `r_Ω` from a known distance to a known vertex (accurate near the vertex).
pub(crate) fn smoothed_distance_near(d: &ConicalDomain, vertex: usize, dist: f64) -> f64 {
    blend(dist, d.vertices[vertex].epsilon, d.plateau)
}

#[cfg(test)]
mod tests {
    use super::super::DomainSpec;
    use super::*;

    fn slit_square() -> ConicalDomain {
        let mut s = DomainSpec::unit_square();
        s.add_vertex("a", [0.3, 0.5]);
        s.add_vertex("b", [0.7, 0.5]);
        s.add_crack("k", "a", "b");
        ConicalDomain::from_spec(s).unwrap()
    }

    #[test]
    fn crack_free_unfold_is_identity() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let u = unfold(&d);
        assert!(u.is_identity_cover());
        assert_eq!(u.alpha, 0);
        assert_eq!(u.vertices.len(), 4);
    }

    #[test]
    fn slit_square_unfold() {
        let d = slit_square();
        let u = unfold(&d);
        assert_eq!(u.m, 2);
        assert_eq!(u.m_prime, 0);
        assert_eq!(u.alpha, 2);
        let k = d.edges.iter().position(|e| e.crack).unwrap();
        assert_eq!(u.fiber_size(k), 2);
        assert!(desingularize_domain(&d).is_err());
        let m = desingularize_boundary(&u);
        assert!(m.unfolded);
        assert_eq!(m.collars.len(), 6);
        assert_eq!(m.boundary_points(), 12);
    }

    #[test]
    fn square_collars() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let m = desingularize_domain(&d).unwrap();
        assert_eq!(m.collars.len(), 4);
        assert_eq!(m.boundary_points(), 8);
        assert_eq!(m.smooth_part.len(), 4);
        for p in &m.smooth_part {
            assert!((p.s_start - 0.25).abs() < 1e-15 && (p.s_end - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothed_distance_examples() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let r = smoothed_distance(&d, [0.1, 0.0]);
        assert!((r.value - 0.1).abs() < 1e-15 && !r.at_vertex);
        assert!((smoothed_distance(&d, [0.5, 0.0]).value - 0.25).abs() < 1e-15);
        let v = smoothed_distance(&d, [0.0, 0.0]);
        assert!(v.at_vertex && v.value == 0.0);
    }

    #[test]
    fn blend_is_monotone_and_lipschitz() {
        let (eps, p) = (0.25, 0.25);
        let mut prev = 0.0;
        let h = 1e-5;
        for i in 1..60000 {
            let x = i as f64 * h;
            let r = blend(x, eps, p);
            assert!(r >= prev - 1e-16);
            assert!(r - prev <= h * (1.0 + 1e-9));
            assert!(r <= x + 1e-15 && r <= p + 1e-15);
            prev = r;
        }
        // strictly between distance and plateau inside the blend band
        let r = blend(0.2, eps, p);
        assert!(r < 0.2 && r > 0.125);
    }
}
