use super::LayerError;
use crate::geometry::{smoothed_distance, ConicalDomain, DesingularizedBoundary, Point};
use crate::quad::gauss_legendre;
use serde::{Deserialize, Serialize};

/// Graded mesh parameters.
///
/// Each edge gets a middle panel of `n` Gauss nodes and, toward every
/// conical end, `nc` geometric panels `[ℓq^{k+1}, ℓq^k]` of `p` Gauss nodes,
/// with ℓ the collar size of that vertex. The innermost piece `[0, ℓq^nc]`
/// carries no nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub n: usize,
    pub q: f64,
    pub nc: usize,
    pub p: usize,
}

impl MeshParams {
    pub fn new(n: usize, q: f64, nc: usize) -> Self {
        MeshParams { n, q, nc, p: 8 }
    }

    pub fn with_panel_nodes(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        if self.n < 4 {
            return Err(LayerError::Mesh(format!("n = {} < 4", self.n)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(LayerError::Mesh(format!("grading ratio {} outside (0, 1)", self.q)));
        }
        if self.nc < 2 {
            return Err(LayerError::Mesh(format!("nc = {} < 2", self.nc)));
        }
        if self.p < 1 {
            return Err(LayerError::Mesh("panel node count must be positive".into()));
        }
        Ok(())
    }
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams::new(32, 0.5, 12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshNode {
    pub piece: usize,
    pub edge: usize,
    /// Arclength from the start of the edge.
    pub s: f64,
    pub point: Point,
    /// Vertex used as local origin.
    pub anchor: usize,
    /// `point − anchor position`, computed without cancellation.
    pub local: Point,
    pub normal: Point,
    pub weight: f64,
    /// Smoothed distance r_Ω.
    pub r: f64,
    /// Limit of the double layer kernel at the diagonal.
    pub diagonal: f64,
    /// Same point on the other sheet of a crack.
    pub pair: Option<usize>,
    /// Node of a geometric panel.
    pub graded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryMesh {
    pub nodes: Vec<MeshNode>,
    pub params: MeshParams,
    /// Node index range of every boundary piece.
    pub piece_ranges: Vec<(usize, usize)>,
    /// Smallest graded scale `min ℓ q^nc`, or the plain spacing without corners.
    pub h_min: f64,
    pub domain_hash: String,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }
}

/// Panel in offsets from one end of the edge.
struct Panel {
    a: f64,
    b: f64,
    from_end: bool,
    graded: bool,
}

/// Nodes on every boundary piece of `m`, geometrically graded toward collars.
pub fn graded_mesh(m: &DesingularizedBoundary, params: MeshParams) -> Result<BoundaryMesh, LayerError> {
    params.validate()?;
    let d = &m.domain;
    let (xg, wg) = gauss_legendre(params.p);
    let (xm, wm) = gauss_legendre(params.n);
    let mut nodes = Vec::new();
    let mut ranges = Vec::new();
    let mut h_min = f64::INFINITY;
    for (pi, piece) in d.pieces.iter().enumerate() {
        let e = &d.edges[piece.edge];
        let len = e.curve.length();
        let start = nodes.len();
        let closed = e.from == e.to && !d.vertices[e.from].is_conical();
        if closed {
            let h = len / params.n as f64;
            h_min = h_min.min(h);
            for j in 0..params.n {
                let s = (j as f64 + 0.5) * h;
                nodes.push(node(d, pi, s, false, h, false));
            }
            ranges.push((start, nodes.len()));
            continue;
        }
        let collar = |v: usize| if d.vertices[v].is_conical() { d.vertices[v].epsilon } else { 0.0 };
        let (la, lb) = (collar(e.from), collar(e.to));
        if !(len > 0.0) || la + lb >= len {
            return Err(LayerError::Mesh(format!("edge {} is degenerate for its collars", e.id)));
        }
        let mut panels = Vec::new();
        for (l, at_end) in [(la, false), (lb, true)] {
            if l == 0.0 {
                continue;
            }
            h_min = h_min.min(l * params.q.powi(params.nc as i32));
            for k in 0..params.nc {
                let (o1, o0) = (l * params.q.powi(k as i32 + 1), l * params.q.powi(k as i32));
                panels.push(Panel { a: o1, b: o0, from_end: at_end, graded: true });
            }
        }
        panels.push(Panel { a: la, b: len - lb, from_end: false, graded: false });
        h_min = h_min.min((len - la - lb) / params.n as f64);
        let key = |p: &Panel| if p.from_end { len - p.b } else { p.a };
        panels.sort_by(|x, y| key(x).total_cmp(&key(y)));
        for p in &panels {
            let (x, w) = if p.graded { (&xg, &wg) } else { (&xm, &wm) };
            let (c, h) = (0.5 * (p.a + p.b), 0.5 * (p.b - p.a));
            let order: Vec<usize> = if p.from_end { (0..x.len()).rev().collect() } else { (0..x.len()).collect() };
            for k in order {
                let o = c + h * x[k];
                if p.graded {
                    nodes.push(node(d, pi, o, p.from_end, h * w[k], true));
                } else {
                    // middle panel: anchor at the nearer end
                    let far = o > 0.5 * len;
                    nodes.push(node(d, pi, if far { len - o } else { o }, far, h * w[k], false));
                }
            }
        }
        ranges.push((start, nodes.len()));
    }
    // pair the two sheets of every crack edge
    for (i, pi) in d.pieces.iter().enumerate() {
        for (j, pj) in d.pieces.iter().enumerate() {
            if i < j && pi.edge == pj.edge {
                let (ri, rj) = (ranges[i], ranges[j]);
                for k in 0..(ri.1 - ri.0) {
                    nodes[ri.0 + k].pair = Some(rj.0 + k);
                    nodes[rj.0 + k].pair = Some(ri.0 + k);
                }
            }
        }
    }
    if nodes.is_empty() {
        return Err(LayerError::Mesh("domain has no boundary".into()));
    }
    Ok(BoundaryMesh { nodes, params, piece_ranges: ranges, h_min, domain_hash: d.hash.clone() })
}

/// Mesh a domain directly, unfolding cracks when present.
pub fn mesh_domain(d: &ConicalDomain, params: MeshParams) -> Result<BoundaryMesh, LayerError> {
    let u = crate::geometry::unfold(d);
    graded_mesh(&crate::geometry::desingularize_boundary(&u), params)
}

/// Node at arclength `offset` from the start (or end) of the piece's edge.
fn node(d: &ConicalDomain, piece: usize, offset: f64, from_end: bool, weight: f64, graded: bool) -> MeshNode {
    let bp = d.pieces[piece];
    let e = &d.edges[bp.edge];
    let len = e.curve.length();
    let s = if from_end { len - offset } else { offset };
    let anchor = if from_end { e.to } else { e.from };
    let local = e.curve.offset_from_end(offset, from_end);
    let v = &d.vertices[anchor];
    let point = [v.position[0] + local[0], v.position[1] + local[1]];
    let r = if v.is_conical() && offset <= v.epsilon {
        crate::geometry::smoothed_distance_near(d, anchor, local[0].hypot(local[1]))
    } else {
        smoothed_distance(d, point).value
    };
    let diagonal = -bp.normal_sign * e.curve.curvature() / (2.0 * std::f64::consts::PI);
    MeshNode {
        piece,
        edge: bp.edge,
        s,
        point,
        anchor,
        local,
        normal: d.piece_normal(piece, s),
        weight,
        r,
        diagonal,
        pair: None,
        graded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{desingularize_domain, DomainSpec};

    fn square_mesh(p: MeshParams) -> BoundaryMesh {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        graded_mesh(&desingularize_domain(&d).unwrap(), p).unwrap()
    }

    #[test]
    fn square_node_count() {
        let m = square_mesh(MeshParams::new(16, 0.5, 8).with_panel_nodes(1));
        assert_eq!(m.len(), 4 * (16 + 2 * 8));
        let m = square_mesh(MeshParams::new(16, 0.5, 8));
        assert_eq!(m.len(), 4 * (16 + 2 * 8 * 8));
    }

    #[test]
    fn nodes_inside_edges_and_weights_positive() {
        let m = square_mesh(MeshParams::new(8, 0.3, 6));
        for n in &m.nodes {
            assert!(n.s > 0.0 && n.s < 1.0 && n.weight > 0.0);
            assert!(n.r > 0.0);
        }
        // geometric panels lose only [0, ℓq^nc] at each end
        let lost = 2.0 * 0.25 * 0.3f64.powi(6);
        assert!((m.total_weight() - 4.0 * (1.0 - lost)).abs() < 1e-12);
    }

    #[test]
    fn spacing_shrinks_toward_corners() {
        let m = square_mesh(MeshParams::new(16, 0.5, 8).with_panel_nodes(1));
        let (a, b) = m.piece_ranges[0];
        let s: Vec<f64> = m.nodes[a..b].iter().map(|n| n.s).collect();
        for k in 0..7 {
            assert!((s[k + 1] / s[k] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_is_uniform() {
        let d = ConicalDomain::from_spec(DomainSpec::circle(1.0)).unwrap();
        let m = mesh_domain(&d, MeshParams::new(64, 0.5, 4)).unwrap();
        assert_eq!(m.len(), 64);
        assert!(m.nodes.iter().all(|n| (n.weight - 2.0 * std::f64::consts::PI / 64.0).abs() < 1e-14));
        assert!(m.nodes.iter().all(|n| (n.r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn crack_sheets_are_paired() {
        let mut s = DomainSpec::unit_square();
        s.add_vertex("a", [0.3, 0.5]);
        s.add_vertex("b", [0.7, 0.5]);
        s.add_crack("k", "a", "b");
        let d = ConicalDomain::from_spec(s).unwrap();
        let m = mesh_domain(&d, MeshParams::new(8, 0.5, 4)).unwrap();
        let paired: Vec<_> = m.nodes.iter().enumerate().filter(|(_, n)| n.pair.is_some()).collect();
        assert_eq!(paired.len(), 2 * (8 + 2 * 4 * 8));
        for (i, n) in paired {
            let o = &m.nodes[n.pair.unwrap()];
            assert_eq!(o.pair, Some(i));
            assert_eq!(o.point, n.point);
            assert!((o.normal[1] + n.normal[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let m = desingularize_domain(&d).unwrap();
        assert!(graded_mesh(&m, MeshParams::new(3, 0.5, 4)).is_err());
        assert!(graded_mesh(&m, MeshParams::new(8, 1.0, 4)).is_err());
        assert!(graded_mesh(&m, MeshParams::new(8, 0.5, 1)).is_err());
    }
}
