//! Construction of the invariant density by exhausting the plane with disks.
//!
//! For each radius `n` in a schedule, the flux equation is solved on the disk
//! `B_n` with boundary value one, the solution is normalised to equal one at
//! the origin, and the run stops once two consecutive normalised solutions
//! agree uniformly on the observation disk. The limiting object is only
//! claimed on that observation disk; nothing is extrapolated beyond it.
//!
//! Positivity of each disk solution is a hard requirement: the continuum
//! problem produces strictly positive solutions, so a non-positive nodal
//! value is evidence of an under-resolved mesh and aborts the run instead of
//! being clamped away.

use std::sync::Arc;

use thiserror::Error;

use crate::coeffs::{CoefficientSet, ScalarField};
use crate::fem::{gradient_recover, mesh_disk, solve_flux, FemError, FemFunction, TriMesh};

/// Disk radii attempted by default.
pub const DEFAULT_SCHEDULE: [u32; 4] = [2, 3, 4, 5];

/// Default uniform-agreement threshold on the observation disk.
pub const DEFAULT_EPS: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("solution is not strictly positive: vertex {vertex} at ({x:.4}, {y:.4}) has value {value:.6e}; refine the mesh spacing h")]
    PositivityFailure {
        vertex: usize,
        x: f64,
        y: f64,
        value: f64,
    },
    #[error("schedule exhausted without two consecutive solutions agreeing within eps = {eps:.3e}; successive sup-differences were {deltas:?}")]
    NonConvergence { eps: f64, deltas: Vec<f64> },
    #[error("bad density-builder parameters: {message}")]
    BadParameters { message: String },
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// One solved disk: the raw solution `u` (boundary value one) and its
/// origin-normalised version `rho`.
#[derive(Debug, Clone)]
pub struct BallRecord {
    pub n: u32,
    pub mesh: Arc<TriMesh>,
    pub u: FemFunction,
    pub rho: FemFunction,
}

/// Per-disk health indicators collected during [`build_density`].
#[derive(Debug, Clone)]
pub struct BallDiagnostics {
    pub n: u32,
    /// Smallest nodal value of the raw solution `u` on `B_n`.
    pub min_u: f64,
    /// `max / min` of the normalised solution over the observation disk.
    pub harnack_ratio: f64,
    /// Sup-difference to the previous normalised solution on the observation
    /// disk; `None` for the first disk of the schedule.
    pub delta: Option<f64>,
}

/// Result of a converged density construction.
#[derive(Debug, Clone)]
pub struct DensitySolution {
    /// Every disk that was solved, in schedule order.
    pub balls: Vec<BallRecord>,
    pub diagnostics: Vec<BallDiagnostics>,
    /// The accepted density sampled on a mesh of the observation disk.
    pub observed: FemFunction,
    pub r_obs: f64,
    /// Disk radius at which the agreement criterion was met.
    pub converged_at: u32,
    /// The sup-difference that met the criterion.
    pub final_delta: f64,
}

impl DensitySolution {
    /// Package the observed density as a scalar field with a recovered
    /// gradient. Evaluations outside the observation disk return `NaN`
    /// (and `NaN` gradients) so that downstream quadrature fails loudly
    /// instead of extrapolating.
    pub fn as_field(&self) -> ScalarField {
        let f = self.observed.clone();
        let g = gradient_recover(&self.observed);
        ScalarField::new(2, move |x| f.eval([x[0], x[1]]).unwrap_or(f64::NAN))
            .with_gradient(move |x| match g.eval([x[0], x[1]]) {
                Ok(v) => vec![v[0], v[1]],
                Err(_) => vec![f64::NAN, f64::NAN],
            })
            .with_domain_radius(self.r_obs)
    }
}

/// Solve the flux equation on the disk of radius `n` with boundary value one.
///
/// The result is strictly positive at every vertex or the solve is rejected:
/// the continuum solution is positive, so a discrete sign flip means the mesh
/// is too coarse for the drift.
pub fn solve_ball(cs: &CoefficientSet, n: u32, h: f64) -> Result<FemFunction, DensityError> {
    if n == 0 {
        return Err(DensityError::BadParameters {
            message: "disk radius n must be a positive integer".to_string(),
        });
    }
    let mesh = Arc::new(mesh_disk(n as f64, h)?);
    let (u, _info) = solve_flux(cs, &mesh, 0.0, 1.0)?;
    check_positive(&u)?;
    Ok(u)
}

/// Divide a positive nodal function by its value at the origin.
///
/// The origin is vertex `0` of every disk mesh, so no interpolation is
/// involved and the normalised function equals exactly `1.0` there. The
/// operation commutes with positive scalings of the input: rescaling `u`
/// before normalising reproduces the same output up to rounding of the
/// rescaled intermediates (bit-for-bit for power-of-two factors).
pub fn normalize_at_origin(u: &FemFunction) -> Result<FemFunction, DensityError> {
    debug_assert_eq!(u.mesh.vertices[0], [0.0, 0.0]);
    let u0 = u.values[0];
    if !(u0 > 0.0) {
        return Err(DensityError::PositivityFailure {
            vertex: 0,
            x: 0.0,
            y: 0.0,
            value: u0,
        });
    }
    let values = u.values.iter().map(|v| v / u0).collect();
    Ok(FemFunction::new(u.mesh.clone(), values).expect("same mesh, same length"))
}

/// `max / min` of the nodal values over vertices of the closed disk `B_{2r}`,
/// the constant probed by interior Harnack-type bounds.
pub fn harnack_diagnostic(rho: &FemFunction, r: f64) -> Result<f64, DensityError> {
    if !(r > 0.0) || 2.0 * r > rho.mesh.radius * (1.0 + 1e-12) {
        return Err(DensityError::BadParameters {
            message: format!(
                "harnack diagnostic needs 0 < 2r <= mesh radius (r = {r}, mesh radius {})",
                rho.mesh.radius
            ),
        });
    }
    let r2 = (2.0 * r) * (2.0 * r) * (1.0 + 1e-12);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut argmin = usize::MAX;
    for (v, p) in rho.mesh.vertices.iter().enumerate() {
        if p[0] * p[0] + p[1] * p[1] <= r2 {
            if rho.values[v] < lo {
                lo = rho.values[v];
                argmin = v;
            }
            hi = hi.max(rho.values[v]);
        }
    }
    if !(lo > 0.0) {
        let p = rho.mesh.vertices[argmin];
        return Err(DensityError::PositivityFailure {
            vertex: argmin,
            x: p[0],
            y: p[1],
            value: lo,
        });
    }
    Ok(hi / lo)
}

/// Build the density for `cs` by solving over the disks in `schedule`
/// (strictly increasing radii), declaring convergence once two consecutive
/// normalised solutions differ by less than `eps` uniformly over the
/// vertices of a mesh on the observation disk `B_{r_obs}`.
///
/// The per-disk `harnack_ratio` diagnostic is taken over the observation
/// disk, i.e. it is `harnack_diagnostic(rho_n, r_obs / 2)`.
pub fn build_density(
    cs: &CoefficientSet,
    schedule: &[u32],
    h: f64,
    r_obs: f64,
    eps: f64,
) -> Result<DensitySolution, DensityError> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DensityError::BadParameters {
            message: "schedule must be a non-empty strictly increasing list of radii".to_string(),
        });
    }
    if !(eps > 0.0) {
        return Err(DensityError::BadParameters {
            message: format!("eps must be positive, got {eps}"),
        });
    }
    if !(r_obs > 0.0) || r_obs >= schedule[0] as f64 {
        return Err(DensityError::BadParameters {
            message: format!(
                "observation radius must satisfy 0 < r_obs < {} (smallest scheduled disk), got {r_obs}",
                schedule[0]
            ),
        });
    }
    let obs_mesh = Arc::new(mesh_disk(r_obs, h)?);

    let mut balls: Vec<BallRecord> = Vec::new();
    let mut diagnostics: Vec<BallDiagnostics> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    let mut prev_obs: Option<Vec<f64>> = None;

    for &n in schedule {
        let u = solve_ball(cs, n, h)?;
        let rho = normalize_at_origin(&u)?;

        // Sample the normalised solution at the observation vertices; the
        // observation disk lies strictly inside every scheduled disk.
        let obs_values: Vec<f64> = obs_mesh
            .vertices
            .iter()
            .map(|&p| rho.eval(p))
            .collect::<Result<_, _>>()?;

        let delta = prev_obs.as_ref().map(|prev| {
            obs_values
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
        });
        if let Some(d) = delta {
            deltas.push(d);
        }

        diagnostics.push(BallDiagnostics {
            n,
            min_u: u.min_value(),
            harnack_ratio: harnack_diagnostic(&rho, r_obs / 2.0)?,
            delta,
        });
        balls.push(BallRecord {
            n,
            mesh: rho.mesh.clone(),
            u,
            rho,
        });

        if let Some(d) = delta {
            if d < eps {
                let observed = FemFunction::new(obs_mesh, obs_values).expect("matching mesh");
                return Ok(DensitySolution {
                    balls,
                    diagnostics,
                    observed,
                    r_obs,
                    converged_at: n,
                    final_delta: d,
                });
            }
        }
        prev_obs = Some(obs_values);
    }

    Err(DensityError::NonConvergence { eps, deltas })
}

fn check_positive(u: &FemFunction) -> Result<(), DensityError> {
    let mut worst = f64::INFINITY;
    let mut argmin = 0;
    for (v, &x) in u.values.iter().enumerate() {
        if x < worst {
            worst = x;
            argmin = v;
        }
    }
    if worst <= 0.0 {
        let p = u.mesh.vertices[argmin];
        return Err(DensityError::PositivityFailure {
            vertex: argmin,
            x: p[0],
            y: p[1],
            value: worst,
        });
    }
    Ok(())
}
