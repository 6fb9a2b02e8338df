//! Assembly of the weak flux form on a meshed disk.
//!
//! For a coefficient triple `(A, C, H)` the bilinear form is
//!
//! ```text
//! B(u, phi) = Int  <(1/2)(A + C^T) grad u, grad phi>
//!                - u <H, grad phi>  +  alpha u phi
//! ```
//!
//! against P1 hat functions. The system is posed for the *deviation*
//! `v = u - b` from the constant boundary value `b`: substituting `u = v + b`
//! into `B(u, phi) = 0` gives `B(v, phi) = b (Int <H, grad phi> - alpha
//! Int phi)` with `v = 0` on the boundary. Posing it this way means a zero
//! drift yields a zero load, so the solver's zero-load fast path returns the
//! constant solution exactly. [`solve_flux`] solves and adds `b` back.
//!
//! Element integrals use the interior three-point rule, so only coefficient
//! *values* are ever evaluated (never their derivatives), and evaluation
//! points avoid mesh vertices and edges. Boundary rows are replaced by the
//! identity, which keeps a symmetric form symmetric.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::csr::CsrMatrix;
use super::mesh::TriMesh;
use super::quadrature::{tri_quadrature_nodes, TRI_RULE};
use super::FemError;
use crate::coeffs::CoefficientSet;

/// A sparse system ready for the solver: matrix, load, Dirichlet data, and
/// the mesh the degrees of freedom live on.
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
    pub mesh: Arc<TriMesh>,
}

struct LocalForm {
    verts: [usize; 3],
    k: [[f64; 3]; 3],
    f: [f64; 3],
}

/// Assemble the flux form with mass shift `alpha` and constant Dirichlet
/// data `boundary_value` on the outer circle. The solution of the returned
/// system is the deviation `v = u - boundary_value` (zero on the boundary);
/// [`solve_flux`] wraps the solve and the shift.
pub fn assemble_ball_form(
    cs: &CoefficientSet,
    mesh: &Arc<TriMesh>,
    alpha: f64,
    boundary_value: f64,
) -> Result<LinearSystem, FemError> {
    if cs.dim() != 2 {
        return Err(FemError::BadSystem {
            message: format!(
                "the disk mesh has 2 dimensions but the coefficients have {}",
                cs.dim()
            ),
        });
    }
    if !alpha.is_finite() || !boundary_value.is_finite() {
        return Err(FemError::BadSystem {
            message: format!("alpha = {alpha} and boundary value = {boundary_value} must be finite"),
        });
    }

    let n = mesh.n_vertices();
    let locals: Vec<LocalForm> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| local_form(cs, mesh, alpha, t))
        .collect::<Result<_, _>>()?;

    let mut is_dirichlet = vec![false; n];
    for &v in &mesh.boundary_vertices {
        is_dirichlet[v] = true;
    }

    // Sequential accumulation in triangle order keeps the result independent
    // of the parallel schedule.
    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(9 * locals.len() + mesh.boundary_vertices.len());
    let mut rhs = vec![0.0; n];
    for loc in &locals {
        for i in 0..3 {
            let gi = loc.verts[i];
            if is_dirichlet[gi] {
                continue;
            }
            rhs[gi] += boundary_value * loc.f[i];
            for j in 0..3 {
                let gj = loc.verts[j];
                if !is_dirichlet[gj] {
                    triplets.push((gi, gj, loc.k[i][j]));
                }
            }
        }
    }
    let dirichlet: BTreeMap<usize, f64> = mesh
        .boundary_vertices
        .iter()
        .map(|&v| (v, 0.0))
        .collect();
    for &v in dirichlet.keys() {
        triplets.push((v, v, 1.0));
    }

    let matrix = CsrMatrix::from_triplets(n, triplets)?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dirichlet,
        mesh: mesh.clone(),
    })
}

/// Solve the stationary flux equation on the meshed disk with constant
/// boundary data: assembles the deviation system, solves it, and shifts the
/// boundary constant back in.
pub fn solve_flux(
    cs: &CoefficientSet,
    mesh: &Arc<TriMesh>,
    alpha: f64,
    boundary_value: f64,
) -> Result<(super::FemFunction, super::SolveInfo), FemError> {
    let sys = assemble_ball_form(cs, mesh, alpha, boundary_value)?;
    let (mut u, info) = super::solve(&sys)?;
    u.shift(boundary_value);
    Ok((u, info))
}

fn local_form(
    cs: &CoefficientSet,
    mesh: &TriMesh,
    alpha: f64,
    t: usize,
) -> Result<LocalForm, FemError> {
    let (grads, _area) = mesh.p1_gradients(t);
    let nodes = tri_quadrature_nodes(mesh, t);
    let mut k = [[0.0; 3]; 3];
    let mut f = [0.0; 3];
    for (q, node) in nodes.iter().enumerate() {
        let x = &node.point[..];
        let a = cs.a().eval(x);
        let c = cs.c().eval(x);
        let m = a.add(&c.transpose()).scale(0.5);
        let h = cs.h().eval(x);
        let w = node.weight;
        let lambda = TRI_RULE[q].0;

        let mut mg = [[0.0; 2]; 3];
        for j in 0..3 {
            m.mul_vec_into(&grads[j], &mut mg[j]);
        }
        for i in 0..3 {
            let h_dot_gi = h.value[0] * grads[i][0] + h.value[1] * grads[i][1];
            f[i] += w * (h_dot_gi - alpha * lambda[i]);
            for j in 0..3 {
                let diffusion = mg[j][0] * grads[i][0] + mg[j][1] * grads[i][1];
                k[i][j] += w * (diffusion - lambda[j] * h_dot_gi + alpha * lambda[i] * lambda[j]);
            }
        }
    }
    let finite = k.iter().flatten().all(|v| v.is_finite()) && f.iter().all(|v| v.is_finite());
    if !finite {
        return Err(FemError::NonFiniteAssembly { triangle: t });
    }
    Ok(LocalForm {
        verts: mesh.triangles[t],
        k,
        f,
    })
}
