use super::mesh::{BoundaryMesh, MeshNode};
use super::LayerError;
use crate::geometry::{dot, ConicalDomain, Point};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point on a boundary piece, by arclength along its edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub piece: usize,
    pub s: f64,
}

/// `−(1/π) (x−y)·ν(y) / |x−y|²` from the difference `x − y`.
#[inline]
pub fn np_kernel_from_difference(diff: Point, normal_y: Point) -> f64 {
    -dot(diff, normal_y) / (PI * dot(diff, diff))
}

/// Double layer kernel between two boundary points.
pub fn np_kernel(d: &ConicalDomain, x: BoundaryPoint, y: BoundaryPoint) -> Result<f64, LayerError> {
    let piece = |b: BoundaryPoint| {
        d.pieces.get(b.piece).ok_or_else(|| LayerError::Kernel(format!("no boundary piece {}", b.piece)))
    };
    let (px, py) = (piece(x)?, piece(y)?);
    let (cx, cy) = (&d.edges[px.edge].curve, &d.edges[py.edge].curve);
    let ly = cy.length();
    let closed_y = d.edges[py.edge].from == d.edges[py.edge].to;
    if !closed_y && !(y.s > 0.0 && y.s < ly) {
        return Err(LayerError::Kernel("the normal is undefined at a vertex".into()));
    }
    let (xp, yp) = (cx.point(x.s), cy.point(y.s));
    let diff = [xp[0] - yp[0], xp[1] - yp[1]];
    if diff == [0.0, 0.0] {
        return Err(LayerError::Kernel("x = y: use the diagonal limit".into()));
    }
    Ok(np_kernel_from_difference(diff, d.piece_normal(y.piece, y.s)))
}

fn entry(nodes: &[MeshNode], straight: &[bool], i: usize, j: usize) -> f64 {
    let (x, y) = (&nodes[i], &nodes[j]);
    if i == j {
        return x.diagonal * x.weight;
    }
    if x.pair == Some(j) {
        // the opposite sheet at the same point: point mass −1
        return -1.0;
    }
    if x.edge == y.edge && straight[x.edge] {
        return 0.0;
    }
    let diff = if x.anchor == y.anchor {
        [x.local[0] - y.local[0], x.local[1] - y.local[1]]
    } else {
        [x.point[0] - y.point[0], x.point[1] - y.point[1]]
    };
    np_kernel_from_difference(diff, y.normal) * y.weight
}

/// Nyström matrix `A[i][j] = k(x_i, x_j) w_j`, with the curvature limit on the
/// diagonal of curved edges and −1 coupling the two sheets of a crack.
pub fn assemble_np(d: &ConicalDomain, mesh: &BoundaryMesh) -> Result<Array2<f64>, LayerError> {
    if mesh.domain_hash != d.hash {
        return Err(LayerError::Mesh("mesh was built for a different domain".into()));
    }
    let straight: Vec<bool> = d.edges.iter().map(|e| e.curve.is_straight()).collect();
    let n = mesh.len();
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (0..n).map(|j| entry(&mesh.nodes, &straight, i, j)).collect()).collect();
    let mut a = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    Ok(a)
}
