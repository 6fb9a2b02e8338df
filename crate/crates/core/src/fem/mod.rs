//! Piecewise-linear finite elements on triangulated disks.
//!
//! All meshes are conforming triangulations of a closed disk centred at the
//! origin, built from concentric vertex rings. Quadrature uses a three-point
//! interior Gauss rule per triangle (exact for quadratics, nodes strictly
//! inside each triangle so coefficient fields are never sampled on mesh
//! edges). The linear solver is a preconditioned stabilised bi-conjugate
//! gradient iteration with a dense direct fallback for small systems.

mod assembly;
mod csr;
mod function;
mod mesh;
mod quadrature;
mod solver;

pub use assembly::{assemble_ball_form, solve_flux, LinearSystem};
pub use csr::CsrMatrix;
pub use function::{gradient_recover, FemFunction, RecoveredGradient};
pub use mesh::{audit, mesh_disk, MeshAudit, TriMesh};
pub use quadrature::{integrate, integrate_quadrature, tri_quadrature_nodes, QuadNode};
pub use solver::{solve, solve_csr, ConvergedBy, SolveInfo, SolveOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid mesh parameters: {message}")]
    InvalidMeshParams { message: String },
    #[error("mesh spacing {h} on radius {radius} needs about {estimated_vertices} vertices, over the cap of {cap}")]
    MeshTooFine {
        radius: f64,
        h: f64,
        estimated_vertices: usize,
        cap: usize,
    },
    #[error("point ({x}, {y}) lies outside the meshed disk")]
    OutsideDomain { x: f64, y: f64 },
    #[error("non-finite quadrature contribution on triangle {triangle}")]
    NonFiniteQuadrature { triangle: usize },
    #[error("assembly produced a non-finite entry on triangle {triangle}")]
    NonFiniteAssembly { triangle: usize },
    #[error("linear solve did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    SolveFailed {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("linear system is inconsistent: {message}")]
    BadSystem { message: String },
    #[error("nodal value vector has length {got}, mesh has {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },
}
