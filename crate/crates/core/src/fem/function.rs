//! Piecewise-linear functions on a mesh and gradient recovery.

use std::sync::Arc;

use super::mesh::TriMesh;
use super::FemError;

/// A continuous piecewise-linear function given by nodal values.
#[derive(Debug, Clone)]
pub struct FemFunction {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

impl FemFunction {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self, FemError> {
        if values.len() != mesh.n_vertices() {
            return Err(FemError::LengthMismatch {
                got: values.len(),
                expected: mesh.n_vertices(),
            });
        }
        Ok(FemFunction { mesh, values })
    }

    /// Barycentric interpolation at `p`. Errors outside the meshed disk.
    pub fn eval(&self, p: [f64; 2]) -> Result<f64, FemError> {
        let (t, bc) = self.mesh.locate(p)?;
        let [a, b, c] = self.mesh.triangles[t];
        Ok(bc[0] * self.values[a] + bc[1] * self.values[b] + bc[2] * self.values[c])
    }

    /// In-place shift by a constant (used to turn the homogeneous solution
    /// `v` into the boundary-value-one solution `u = v + 1`).
    pub fn shift(&mut self, c: f64) {
        for v in &mut self.values {
            *v += c;
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max / min` of nodal values over vertices inside the closed ball of
    /// the given radius; `None` when no vertex lies inside.
    pub fn ratio_on_ball(&self, radius: f64) -> Option<(f64, f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut seen = false;
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            if p[0] * p[0] + p[1] * p[1] <= radius * radius * (1.0 + 1e-12) {
                lo = lo.min(self.values[v]);
                hi = hi.max(self.values[v]);
                seen = true;
            }
        }
        if seen {
            Some((hi / lo, lo, hi))
        } else {
            None
        }
    }
}

/// Per-vertex gradient field recovered from the piecewise-constant element
/// gradients by area-weighted averaging over each vertex's triangle star.
/// The two components are themselves piecewise-linear nodal fields.
#[derive(Debug, Clone)]
pub struct RecoveredGradient {
    pub mesh: Arc<TriMesh>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl RecoveredGradient {
    /// Interpolated gradient at `p`.
    pub fn eval(&self, p: [f64; 2]) -> Result<[f64; 2], FemError> {
        let (t, bc) = self.mesh.locate(p)?;
        let [a, b, c] = self.mesh.triangles[t];
        Ok([
            bc[0] * self.gx[a] + bc[1] * self.gx[b] + bc[2] * self.gx[c],
            bc[0] * self.gy[a] + bc[1] * self.gy[b] + bc[2] * self.gy[c],
        ])
    }
}

/// Recover a nodal gradient for `f` by area-weighted averaging of the
/// constant per-triangle gradients around each vertex.
pub fn gradient_recover(f: &FemFunction) -> RecoveredGradient {
    let mesh = &f.mesh;
    let n = mesh.n_vertices();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut weight = vec![0.0; n];
    for t in 0..mesh.n_triangles() {
        let (grads, area) = mesh.p1_gradients(t);
        let [a, b, c] = mesh.triangles[t];
        let mut tx = 0.0;
        let mut ty = 0.0;
        for (v, g) in [a, b, c].iter().zip(grads.iter()) {
            tx += f.values[*v] * g[0];
            ty += f.values[*v] * g[1];
        }
        for v in [a, b, c] {
            gx[v] += area * tx;
            gy[v] += area * ty;
            weight[v] += area;
        }
    }
    for v in 0..n {
        if weight[v] > 0.0 {
            gx[v] /= weight[v];
            gy[v] /= weight[v];
        }
    }
    RecoveredGradient {
        mesh: f.mesh.clone(),
        gx,
        gy,
    }
}
