//! Numerical toolkit for infinitesimally invariant densities of second-order
//! elliptic diffusion operators.
//!
//! The library is organised around one pipeline:
//!
//! * [`coeffs`] — coefficient triples `(A, C, H)` (symmetric diffusion matrix,
//!   antisymmetric perturbation, drift), their validation, and the drift
//!   fields derived from a candidate density.
//! * [`fem`] — piecewise-linear finite elements on triangulated disks:
//!   meshes, quadrature, assembly of the density equation, and a sparse
//!   nonsymmetric solver.
//! * [`density`] — the ball-exhaustion construction of an invariant density
//!   `rho` (solve on growing disks with boundary value one, normalise at the
//!   origin, compare restrictions).
//! * [`verify`] — quadrature checks of the integral identities a density must
//!   satisfy (invariance residual, weak divergence-free residuals, bilinear
//!   form adjointness).
//! * [`sde`] — Euler–Maruyama simulation of the associated stochastic
//!   differential equation with reproducible per-path random streams.
//! * [`estimators`] — Monte Carlo checks built on the simulator: occupation
//!   (Krylov-type) estimates, moment envelopes, non-explosion criteria,
//!   semigroup/resolvent probes, sub-invariance and irreducibility tests.

pub mod coeffs;
pub mod density;
pub mod fem;
pub mod linalg;
pub mod verify;
