use super::mesh::BoundaryMesh;
use super::LayerError;
use serde::{Deserialize, Serialize};

/// Discrete norm `(Σ_{j ≤ m} ‖r_Ω^{j−a} ∂_s^j u‖²)^{1/2}` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub order: usize,
    pub index: f64,
}

impl WeightedNormSpec {
    pub fn new(order: usize, index: f64) -> Self {
        WeightedNormSpec { order, index }
    }

    /// Index used by the space `K^m_{1/2+a}`.
    pub fn for_weight(order: usize, a: f64) -> Self {
        WeightedNormSpec { order, index: 0.5 + a }
    }
}

pub fn weighted_norm(u: &[f64], mesh: &BoundaryMesh, spec: WeightedNormSpec) -> Result<f64, LayerError> {
    if spec.order > 1 {
        return Err(LayerError::Unsupported(format!("weighted norms of order {} (only 0 and 1)", spec.order)));
    }
    if u.len() != mesh.len() {
        return Err(LayerError::Mesh(format!("{} values for {} nodes", u.len(), mesh.len())));
    }
    let a = spec.index;
    let mut total: f64 = mesh.nodes.iter().zip(u).map(|(n, v)| n.weight * n.r.powf(-2.0 * a) * v * v).sum();
    if spec.order == 1 {
        for &(s, e) in &mesh.piece_ranges {
            let k = e - s;
            if k < 2 {
                continue;
            }
            for i in s..e {
                // one-sided at the ends, three-point on the nonuniform interior
                let du = if i == s {
                    (u[i + 1] - u[i]) / (mesh.nodes[i + 1].s - mesh.nodes[i].s)
                } else if i + 1 == e {
                    (u[i] - u[i - 1]) / (mesh.nodes[i].s - mesh.nodes[i - 1].s)
                } else {
                    let (h0, h1) = (mesh.nodes[i].s - mesh.nodes[i - 1].s, mesh.nodes[i + 1].s - mesh.nodes[i].s);
                    (h0 * h0 * (u[i + 1] - u[i]) + h1 * h1 * (u[i] - u[i - 1])) / (h0 * h1 * (h0 + h1))
                };
                let n = &mesh.nodes[i];
                total += n.weight * n.r.powf(2.0 * (1.0 - a)) * du * du;
            }
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::mesh::{mesh_domain, MeshParams};
    use super::*;
    use crate::geometry::{ConicalDomain, DomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn constant_with_zero_index() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let m = mesh_domain(&d, MeshParams::new(16, 0.5, 30)).unwrap();
        let u = vec![1.0; m.len()];
        let v = weighted_norm(&u, &m, WeightedNormSpec::new(0, 0.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn circle_unit_weight() {
        let d = ConicalDomain::from_spec(DomainSpec::circle(1.0)).unwrap();
        let m = mesh_domain(&d, MeshParams::new(64, 0.5, 4)).unwrap();
        let u = vec![1.0; m.len()];
        let v = weighted_norm(&u, &m, WeightedNormSpec::new(0, 0.5)).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn corner_power_is_finite_or_divergent() {
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let norms = |a: f64| -> Vec<f64> {
            [10, 20, 40]
                .iter()
                .map(|&nc| {
                    let m = mesh_domain(&d, MeshParams::new(16, 0.5, nc)).unwrap();
                    let u: Vec<f64> = m.nodes.iter().map(|n| n.r.powf(0.25)).collect();
                    weighted_norm(&u, &m, WeightedNormSpec::new(0, a)).unwrap()
                })
                .collect()
        };
        // ∫₀ r^{2(1/4 − a)} dr converges for a = 1/2 and diverges for a = 1
        let conv = norms(0.5);
        assert!((conv[2] - conv[1]).abs() < 1e-3 * conv[2]);
        let div = norms(1.0);
        assert!(div[1] > 4.0 * div[0] && div[2] > 4.0 * div[1]);
    }

    #[test]
    fn first_order_of_linear_function() {
        // u = s on each edge: derivative 1, weight r^{2(1−a)} with a = 1
        let d = ConicalDomain::from_spec(DomainSpec::unit_square()).unwrap();
        let m = mesh_domain(&d, MeshParams::new(16, 0.5, 12)).unwrap();
        let u: Vec<f64> = m.nodes.iter().map(|n| n.s).collect();
        let v0 = weighted_norm(&u, &m, WeightedNormSpec::new(0, 1.0)).unwrap();
        let v1 = weighted_norm(&u, &m, WeightedNormSpec::new(1, 1.0)).unwrap();
        assert!(((v1 * v1 - v0 * v0) - m.total_weight()).abs() < 1e-9);
        assert!(weighted_norm(&u, &m, WeightedNormSpec::new(2, 0.0)).is_err());
    }
}
