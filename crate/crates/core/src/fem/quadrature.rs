//! Triangle quadrature.
//!
//! A single three-point rule is used throughout: barycentric nodes
//! `(2/3, 1/6, 1/6)` and its cyclic shifts, each with weight `1/3`. The rule
//! integrates quadratics exactly and keeps every node strictly inside the
//! triangle, so integrands that blow up on mesh lines (drift fields with
//! integrable singularities along coordinate segments) are never sampled at
//! their worst points.

use super::mesh::TriMesh;
use super::FemError;

/// Barycentric coordinates and weight of one quadrature node.
pub const TRI_RULE: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// A quadrature node in physical coordinates with its weight (already scaled
/// by triangle area) and owning triangle.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub point: [f64; 2],
    pub weight: f64,
    pub triangle: usize,
}

/// Physical quadrature nodes of triangle `t`.
#[inline]
pub fn tri_quadrature_nodes(mesh: &TriMesh, t: usize) -> [QuadNode; 3] {
    let [p0, p1, p2] = mesh.tri_coords(t);
    let area = mesh.signed_area(t);
    let mut out = [QuadNode {
        point: [0.0, 0.0],
        weight: 0.0,
        triangle: t,
    }; 3];
    for (k, (bc, w)) in TRI_RULE.iter().enumerate() {
        out[k] = QuadNode {
            point: [
                bc[0] * p0[0] + bc[1] * p1[0] + bc[2] * p2[0],
                bc[0] * p0[1] + bc[1] * p1[1] + bc[2] * p2[1],
            ],
            weight: w * area,
            triangle: t,
        };
    }
    out
}

/// Integrate `f` over the meshed disk. A non-finite contribution is an error
/// naming the offending triangle.
pub fn integrate(mesh: &TriMesh, f: impl Fn([f64; 2]) -> f64) -> Result<f64, FemError> {
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let mut local = 0.0;
        for node in tri_quadrature_nodes(mesh, t) {
            local += node.weight * f(node.point);
        }
        if !local.is_finite() {
            return Err(FemError::NonFiniteQuadrature { triangle: t });
        }
        total += local;
    }
    Ok(total)
}

/// All quadrature nodes of the mesh, triangle by triangle. Useful when an
/// integrand is expensive and must be evaluated in parallel by the caller.
pub fn integrate_quadrature(mesh: &TriMesh) -> Vec<QuadNode> {
    let mut nodes = Vec::with_capacity(3 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        nodes.extend_from_slice(&tri_quadrature_nodes(mesh, t));
    }
    nodes
}
