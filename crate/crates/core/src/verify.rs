//! Quadrature verification of the integral identities behind an invariant
//! density.
//!
//! Everything here is a pure function of a coefficient set, a density field,
//! a compactly supported test function, and a quadrature mesh. The checks
//! are:
//!
//! * the stationarity residual `∫ Lφ ρ dx`, with `L` applied in
//!   non-divergence form (`½ tr(A ∇²φ) + ⟨G, ∇φ⟩`) so that only values of
//!   `ρ` — never its derivatives — enter the integrand;
//! * the weak divergence-free residual `∫ ⟨b, ∇φ⟩ ρ dx` for a drift
//!   component `b` that should be orthogonal to gradients;
//! * the bilinear form `E(f,g) = ½∫⟨(A+C)∇f, ∇g⟩ρ dx − ∫⟨B̄,∇f⟩ g ρ dx`
//!   and the two adjointness gaps `E(f,g) + ∫ Lf·g ρ dx` and
//!   `E(f,g) + ∫ f·L̂g ρ dx`, the co-generator `L̂` using the reversed
//!   drift `Ĝ = 2β^{ρ,A} − G`.
//!
//! All identities are exact in the continuum, so tolerances measure
//! quadrature and density-approximation error only; they are scaled by the
//! C²-size of the test functions involved.

use rayon::prelude::*;
use thiserror::Error;

use crate::coeffs::{derived_drifts, drift_g, CoeffError, CoefficientSet, ScalarField, VectorField};
use crate::fem::{tri_quadrature_nodes, FemError, TriMesh};

/// Default number of random test functions in a verification suite.
pub const DEFAULT_BUMP_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("test-function support (center ({cx:.4}, {cy:.4}), radius {radius:.4}) is not strictly inside the disk of radius {limit:.4}")]
    SupportEscapes {
        cx: f64,
        cy: f64,
        radius: f64,
        limit: f64,
    },
    #[error("bad test-function parameters: {message}")]
    BadParameters { message: String },
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// A twice continuously differentiable function with compactly supported
/// derivatives, the class the quadrature checks are stated for.
pub trait C2Field: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
    /// Symmetric second-derivative matrix.
    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2];
    /// Center and radius of a closed ball containing the support.
    fn support_ball(&self) -> ([f64; 2], f64);
}

/// The standard smooth bump `exp(1 − 1/(1 − t))` with `t = (‖x−c‖/r)²`,
/// scaled to equal one at its center and to vanish with all derivatives on
/// `‖x−c‖ = r`.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    center: [f64; 2],
    radius: f64,
}

/// Below this distance-to-support-boundary parameter the profile underflows
/// to zero anyway; evaluating through it would divide by a denormal.
const W_FLOOR: f64 = 1e-12;

impl TestFunction {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self, VerifyError> {
        if !(radius > 0.0) || !radius.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(VerifyError::BadParameters {
                message: format!(
                    "bump needs a finite center and positive radius, got ({}, {}) and {radius}",
                    center[0], center[1]
                ),
            });
        }
        Ok(TestFunction { center, radius })
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `(φ, w, dx, dy)` strictly inside the support, `None` outside.
    #[inline]
    fn pieces(&self, x: [f64; 2]) -> Option<(f64, f64, f64, f64)> {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let t = (dx * dx + dy * dy) / (self.radius * self.radius);
        let w = 1.0 - t;
        if w <= W_FLOOR {
            return None;
        }
        Some(((1.0 - 1.0 / w).exp(), w, dx, dy))
    }
}

impl C2Field for TestFunction {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.pieces(x).map_or(0.0, |(phi, ..)| phi)
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match self.pieces(x) {
            None => [0.0, 0.0],
            Some((phi, w, dx, dy)) => {
                let k = -2.0 * phi / (self.radius * self.radius * w * w);
                [k * dx, k * dy]
            }
        }
    }

    fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match self.pieces(x) {
            None => [[0.0; 2]; 2],
            Some((phi, w, dx, dy)) => {
                let r2 = self.radius * self.radius;
                let k = -2.0 * phi / (r2 * w * w);
                let q = -4.0 * phi * (2.0 * w - 1.0) / (r2 * r2 * w * w * w * w);
                let off = q * dx * dy;
                [[q * dx * dx + k, off], [off, q * dy * dy + k]]
            }
        }
    }

    fn support_ball(&self) -> ([f64; 2], f64) {
        (self.center, self.radius)
    }
}

/// Sup over quadrature nodes of `|φ| + ‖∇φ‖ + ‖∇²φ‖_F`, the size against
/// which residual tolerances are scaled.
pub fn c2_scale<F: C2Field>(phi: &F, mesh: &TriMesh) -> f64 {
    let ([cx, cy], r) = phi.support_ball();
    let reach2 = (r * 1.001) * (r * 1.001);
    let mut scale = 0.0_f64;
    for t in 0..mesh.n_triangles() {
        for node in tri_quadrature_nodes(mesh, t) {
            let dx = node.point[0] - cx;
            let dy = node.point[1] - cy;
            if dx * dx + dy * dy > reach2 {
                continue;
            }
            let v = phi.value(node.point).abs();
            let g = phi.gradient(node.point);
            let h = phi.hessian(node.point);
            let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let hn = (h[0][0] * h[0][0] + 2.0 * h[0][1] * h[0][1] + h[1][1] * h[1][1]).sqrt();
            scale = scale.max(v + gn + hn);
        }
    }
    scale
}

fn check_support<F: C2Field>(
    phi: &F,
    mesh: &TriMesh,
    rho: &ScalarField,
) -> Result<(), VerifyError> {
    let ([cx, cy], r) = phi.support_ball();
    let dist = (cx * cx + cy * cy).sqrt() + r;
    if dist >= mesh.radius {
        return Err(VerifyError::SupportEscapes {
            cx,
            cy,
            radius: r,
            limit: mesh.radius,
        });
    }
    if let Some(dr) = rho.domain_radius() {
        if dist > dr * (1.0 + 1e-12) {
            return Err(VerifyError::SupportEscapes {
                cx,
                cy,
                radius: r,
                limit: dr,
            });
        }
    }
    Ok(())
}

/// Composite quadrature of `integrand` over the mesh. `Ok(None)` marks a
/// node whose contribution is structurally zero and skips the (possibly
/// expensive, possibly undefined) coefficient evaluations there.
fn integrate_nodes<G>(mesh: &TriMesh, mut integrand: G) -> Result<f64, VerifyError>
where
    G: FnMut([f64; 2]) -> Result<Option<f64>, VerifyError>,
{
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        for node in tri_quadrature_nodes(mesh, t) {
            if let Some(v) = integrand(node.point)? {
                if !v.is_finite() {
                    return Err(FemError::NonFiniteQuadrature { triangle: t }.into());
                }
                total += node.weight * v;
            }
        }
    }
    Ok(total)
}

#[inline]
fn is_zero2(v: [f64; 2]) -> bool {
    v[0] == 0.0 && v[1] == 0.0
}

#[inline]
fn is_zero22(m: [[f64; 2]; 2]) -> bool {
    m[0][0] == 0.0 && m[0][1] == 0.0 && m[1][0] == 0.0 && m[1][1] == 0.0
}

/// `Lφ` at a point, in non-divergence form, given the drift `G` there.
#[inline]
fn generator_apply(a: &crate::linalg::SquareMat, g: &[f64], grad: [f64; 2], hess: [[f64; 2]; 2]) -> f64 {
    let mut trace = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            trace += a.get(i, j) * hess[i][j];
        }
    }
    0.5 * trace + g[0] * grad[0] + g[1] * grad[1]
}

/// Stationarity residual `∫ Lφ ρ dx` with `Lφ = ½tr(A∇²φ) + ⟨G,∇φ⟩`.
///
/// Vanishes for every compactly supported `φ` exactly when `ρ dx` is
/// infinitesimally invariant for the operator; the returned quadrature value
/// is compared against a scaled tolerance by the caller. Flagged singular
/// drift values are integrated as-is (the quadrature nodes are interior
/// Gauss points and avoid the singular sets of the bundled examples).
pub fn invariance_residual<F: C2Field>(
    cs: &CoefficientSet,
    rho: &ScalarField,
    phi: &F,
    mesh: &TriMesh,
) -> Result<f64, VerifyError> {
    check_support(phi, mesh, rho)?;
    integrate_nodes(mesh, |p| {
        let grad = phi.gradient(p);
        let hess = phi.hessian(p);
        if is_zero2(grad) && is_zero22(hess) {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let a = cs.a().eval(&xs);
        let g = drift_g(cs, &xs, true)?;
        let lphi = generator_apply(&a, &g.value, grad, hess);
        Ok(Some(lphi * rho.eval(&xs)))
    })
}

/// Weak divergence-free residual `∫ ⟨b, ∇φ⟩ ρ dx` for an explicit field `b`.
pub fn divfree_residual<F: C2Field>(
    b: &VectorField,
    rho: &ScalarField,
    phi: &F,
    mesh: &TriMesh,
) -> Result<f64, VerifyError> {
    check_support(phi, mesh, rho)?;
    integrate_nodes(mesh, |p| {
        let grad = phi.gradient(p);
        if is_zero2(grad) {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let bv = b.eval(&xs);
        Ok(Some(
            (bv.value[0] * grad[0] + bv.value[1] * grad[1]) * rho.eval(&xs),
        ))
    })
}

/// Weak divergence-free residual for the canonical drift component
/// `β^{ρ,Cᵀ} + B̄` derived from the coefficient set and density.
pub fn weakdiv_residual<F: C2Field>(
    cs: &CoefficientSet,
    rho: &ScalarField,
    phi: &F,
    mesh: &TriMesh,
) -> Result<f64, VerifyError> {
    check_support(phi, mesh, rho)?;
    integrate_nodes(mesh, |p| {
        let grad = phi.gradient(p);
        if is_zero2(grad) {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let dd = derived_drifts(cs, rho, &xs, true)?;
        // β^{ρ,M} is linear in M, so β^{ρ,Cᵀ} = β^{ρ,A+Cᵀ} − β^{ρ,A}.
        let b = [
            dd.beta_act[0] - dd.beta_a[0] + dd.bbar[0],
            dd.beta_act[1] - dd.beta_a[1] + dd.bbar[1],
        ];
        Ok(Some((b[0] * grad[0] + b[1] * grad[1]) * rho.eval(&xs)))
    })
}

/// The bilinear form `E(f,g) = ½∫⟨(A+C)∇f,∇g⟩ρ dx − ∫⟨B̄,∇f⟩ g ρ dx`.
pub fn dirichlet_form<F: C2Field, G: C2Field>(
    cs: &CoefficientSet,
    rho: &ScalarField,
    f: &F,
    g: &G,
    mesh: &TriMesh,
) -> Result<f64, VerifyError> {
    check_support(f, mesh, rho)?;
    check_support(g, mesh, rho)?;
    integrate_nodes(mesh, |p| {
        let gf = f.gradient(p);
        if is_zero2(gf) {
            return Ok(None);
        }
        let gg = g.gradient(p);
        let gv = g.value(p);
        if is_zero2(gg) && gv == 0.0 {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let m = cs.a().eval(&xs).add(&cs.c().eval(&xs));
        let dd = derived_drifts(cs, rho, &xs, true)?;
        let mgf = m.mul_vec(&[gf[0], gf[1]]);
        let sym = 0.5 * (mgf[0] * gg[0] + mgf[1] * gg[1]);
        let skew = (dd.bbar[0] * gf[0] + dd.bbar[1] * gf[1]) * gv;
        Ok(Some((sym - skew) * rho.eval(&xs)))
    })
}

/// Adjointness gaps `(E(f,g) + ∫Lf·g ρ dx, E(f,g) + ∫f·L̂g ρ dx)`.
///
/// Both vanish in the continuum when `ρ dx` is invariant: the form is the
/// negative of the generator pairing from either side.
pub fn adjoint_gap<F: C2Field, G: C2Field>(
    cs: &CoefficientSet,
    rho: &ScalarField,
    f: &F,
    g: &G,
    mesh: &TriMesh,
) -> Result<(f64, f64), VerifyError> {
    let e = dirichlet_form(cs, rho, f, g, mesh)?;

    let lf_g = integrate_nodes(mesh, |p| {
        let gv = g.value(p);
        if gv == 0.0 {
            return Ok(None);
        }
        let grad = f.gradient(p);
        let hess = f.hessian(p);
        if is_zero2(grad) && is_zero22(hess) {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let a = cs.a().eval(&xs);
        let gd = drift_g(cs, &xs, true)?;
        Ok(Some(
            generator_apply(&a, &gd.value, grad, hess) * gv * rho.eval(&xs),
        ))
    })?;

    let f_lhatg = integrate_nodes(mesh, |p| {
        let fv = f.value(p);
        if fv == 0.0 {
            return Ok(None);
        }
        let grad = g.gradient(p);
        let hess = g.hessian(p);
        if is_zero2(grad) && is_zero22(hess) {
            return Ok(None);
        }
        let xs = [p[0], p[1]];
        let a = cs.a().eval(&xs);
        let dd = derived_drifts(cs, rho, &xs, true)?;
        Ok(Some(
            generator_apply(&a, &dd.ghat, grad, hess) * fv * rho.eval(&xs),
        ))
    })?;

    Ok((e + lf_g, e + f_lhatg))
}

/// Draw `count` test functions with centers uniform in the disk of radius
/// `r_obs / 2` and radii uniform in `[0.1, 0.3]`, shrunk where necessary so
/// every support stays strictly inside the disk of radius `r_obs`.
pub fn bump_suite(r_obs: f64, count: usize, seed: u64) -> Result<Vec<TestFunction>, VerifyError> {
    use rand::{Rng, SeedableRng};
    if !(r_obs > 0.0) {
        return Err(VerifyError::BadParameters {
            message: format!("observation radius must be positive, got {r_obs}"),
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bumps = Vec::with_capacity(count);
    for _ in 0..count {
        let rad_pos = 0.5 * r_obs * rng.gen::<f64>().sqrt();
        let angle = std::f64::consts::TAU * rng.gen::<f64>();
        let center = [rad_pos * angle.cos(), rad_pos * angle.sin()];
        let drawn = 0.1 + 0.2 * rng.gen::<f64>();
        let radius = drawn.min(0.9 * (r_obs - rad_pos));
        bumps.push(TestFunction::new(center, radius)?);
    }
    Ok(bumps)
}

/// One row of a verification suite: all residuals for test function
/// `test_id`, with the adjointness checks pairing it with the next bump in
/// the suite (cyclically).
#[derive(Debug, Clone)]
pub struct BumpCheck {
    pub test_id: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub residual_inv: f64,
    pub residual_divfree: f64,
    pub adjoint_gap_l: f64,
    pub adjoint_gap_lhat: f64,
    /// `eps · ‖φ‖_C²`: the bound applied to the two residuals.
    pub tolerance: f64,
    /// `eps/10 · ‖f‖_C² ‖g‖_C²`: the bound applied to the adjoint gaps.
    pub tolerance_adjoint: f64,
    pub pass: bool,
}

/// Run every check for every bump. Residuals are compared against
/// `eps · ‖φ‖_C²`; the adjointness gaps, which carry two test functions,
/// against `eps/10 · ‖f‖_C² ‖g‖_C²`. A row passes when all four comparisons
/// hold.
pub fn verify_suite(
    cs: &CoefficientSet,
    rho: &ScalarField,
    mesh: &TriMesh,
    bumps: &[TestFunction],
    eps: f64,
) -> Result<Vec<BumpCheck>, VerifyError> {
    if !(eps > 0.0) {
        return Err(VerifyError::BadParameters {
            message: format!("tolerance factor must be positive, got {eps}"),
        });
    }
    let scales: Vec<f64> = bumps.iter().map(|b| c2_scale(b, mesh)).collect();
    bumps
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            let partner = &bumps[(i + 1) % bumps.len()];
            let residual_inv = invariance_residual(cs, rho, phi, mesh)?;
            let residual_divfree = weakdiv_residual(cs, rho, phi, mesh)?;
            let (adjoint_gap_l, adjoint_gap_lhat) = adjoint_gap(cs, rho, phi, partner, mesh)?;
            let tolerance = eps * scales[i];
            let tolerance_adjoint = 0.1 * eps * scales[i] * scales[(i + 1) % bumps.len()];
            let pass = residual_inv.abs() <= tolerance
                && residual_divfree.abs() <= tolerance
                && adjoint_gap_l.abs() <= tolerance_adjoint
                && adjoint_gap_lhat.abs() <= tolerance_adjoint;
            Ok(BumpCheck {
                test_id: i,
                center: phi.center(),
                radius: phi.radius(),
                residual_inv,
                residual_divfree,
                adjoint_gap_l,
                adjoint_gap_lhat,
                tolerance,
                tolerance_adjoint,
                pass,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::example;
    use crate::fem::mesh_disk;

    fn gaussian_field() -> ScalarField {
        ScalarField::new(2, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).with_gradient(|x| {
            let e = (-(x[0] * x[0] + x[1] * x[1])).exp();
            vec![-2.0 * x[0] * e, -2.0 * x[1] * e]
        })
    }

    /// Weighted sum of two bumps, for the bilinearity check.
    struct Combo {
        a: f64,
        f1: TestFunction,
        b: f64,
        f2: TestFunction,
    }

    impl C2Field for Combo {
        fn value(&self, x: [f64; 2]) -> f64 {
            self.a * self.f1.value(x) + self.b * self.f2.value(x)
        }
        fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
            let g1 = self.f1.gradient(x);
            let g2 = self.f2.gradient(x);
            [self.a * g1[0] + self.b * g2[0], self.a * g1[1] + self.b * g2[1]]
        }
        fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
            let h1 = self.f1.hessian(x);
            let h2 = self.f2.hessian(x);
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = self.a * h1[i][j] + self.b * h2[i][j];
                }
            }
            out
        }
        fn support_ball(&self) -> ([f64; 2], f64) {
            // Smallest ball containing both supports.
            let (c1, r1) = self.f1.support_ball();
            let (c2, r2) = self.f2.support_ball();
            let d = ((c2[0] - c1[0]).powi(2) + (c2[1] - c1[1]).powi(2)).sqrt();
            if d + r2 <= r1 {
                return (c1, r1);
            }
            if d + r1 <= r2 {
                return (c2, r2);
            }
            let r = 0.5 * (d + r1 + r2);
            let s = (d + r2 - r1) / (2.0 * d);
            (
                [c1[0] + s * (c2[0] - c1[0]), c1[1] + s * (c2[1] - c1[1])],
                r,
            )
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let phi = TestFunction::new([0.2, -0.1], 0.45).unwrap();
        assert_eq!(phi.value([0.2, -0.1]), 1.0);
        assert_eq!(phi.value([0.7, -0.1]), 0.0);
        assert_eq!(phi.gradient([0.9, 0.4]), [0.0, 0.0]);

        let h = 1e-6;
        for p in [[0.2, -0.1], [0.35, 0.05], [0.0, -0.3], [0.55, -0.2]] {
            let g = phi.gradient(p);
            let hess = phi.hessian(p);
            assert_eq!(hess[0][1], hess[1][0]);
            for i in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[i] += h;
                pm[i] -= h;
                let fd = (phi.value(pp) - phi.value(pm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 2e-5 * (1.0 + g[i].abs()), "grad {i} at {p:?}");
                let gdp = phi.gradient(pp);
                let gdm = phi.gradient(pm);
                for j in 0..2 {
                    let fd2 = (gdp[j] - gdm[j]) / (2.0 * h);
                    assert!(
                        (fd2 - hess[j][i]).abs() < 5e-4 * (1.0 + hess[j][i].abs()),
                        "hessian {j}{i} at {p:?}: fd {fd2} vs {}",
                        hess[j][i]
                    );
                }
            }
        }
    }

    #[test]
    fn laplacian_and_constant_field_integrate_to_zero() {
        // With unit diffusion, no rotation, and no drift, the stationarity
        // residual is the integral of half the Laplacian of the bump, which
        // is exactly zero in the continuum; likewise the pairing of a
        // constant field with the gradient. Both are pure quadrature error.
        let cs = example("identity").unwrap();
        let rho = ScalarField::one(2);
        let mesh = mesh_disk(1.0, 0.005).unwrap();
        let phi = TestFunction::new([0.1, -0.2], 0.3).unwrap();
        let res = invariance_residual(&cs, &rho, &phi, &mesh).unwrap();
        assert!(res.abs() <= 1e-6, "laplacian residual {res:.3e}");

        let b = crate::coeffs::VectorField::new(2, |_| vec![1.0, 0.0]);
        let res = divfree_residual(&b, &rho, &phi, &mesh).unwrap();
        assert!(res.abs() <= 1e-6, "constant-field residual {res:.3e}");
    }

    #[test]
    fn identity_adjoint_gaps_are_quadrature_small() {
        let cs = example("identity").unwrap();
        let rho = ScalarField::one(2);
        let mesh = mesh_disk(1.0, 0.005).unwrap();
        let f = TestFunction::new([0.05, 0.0], 0.55).unwrap();
        let g = TestFunction::new([-0.1, 0.05], 0.5).unwrap();
        let (g1, g2) = adjoint_gap(&cs, &rho, &f, &g, &mesh).unwrap();
        assert!(g1.abs() <= 1e-6, "generator-side gap {g1:.3e}");
        assert!(g2.abs() <= 1e-6, "co-generator-side gap {g2:.3e}");
    }

    #[test]
    fn gaussian_residuals_pass_scaled_tolerance_and_shrink() {
        let cs = example("ou").unwrap();
        let rho = gaussian_field();
        let bumps = bump_suite(1.0, 10, 7).unwrap();
        let worst_at = |h: f64| -> f64 {
            let mesh = mesh_disk(1.0, h).unwrap();
            bumps
                .iter()
                .map(|b| {
                    let res = invariance_residual(&cs, &rho, b, &mesh).unwrap().abs();
                    let s = c2_scale(b, &mesh);
                    assert!(res <= 1e-3 * s, "residual {res:.3e} vs scale {s:.3e} at h={h}");
                    res
                })
                .fold(0.0, f64::max)
        };
        let coarse = worst_at(0.02);
        let fine = worst_at(0.01);
        assert!(
            fine < 0.5 * coarse,
            "residuals did not shrink under refinement: {coarse:.3e} -> {fine:.3e}"
        );
    }

    #[test]
    fn rotational_flat_example_passes_scaled_tolerance_and_shrinks() {
        // The rotational example has a drift component that is singular on a
        // line through the support of this bump; the integrable singularity
        // slows quadrature convergence but both residuals must still sit
        // inside the scaled tolerance and improve under refinement.
        let cs = example("infsin").unwrap();
        let rho = ScalarField::one(2);
        let phi = TestFunction::new([0.05, 0.1], 0.3).unwrap();
        let run = |h: f64| -> (f64, f64, f64) {
            let mesh = mesh_disk(1.0, h).unwrap();
            (
                invariance_residual(&cs, &rho, &phi, &mesh).unwrap().abs(),
                weakdiv_residual(&cs, &rho, &phi, &mesh).unwrap().abs(),
                c2_scale(&phi, &mesh),
            )
        };
        let (inv_c, div_c, _) = run(0.02);
        let (inv_f, div_f, scale) = run(0.01);
        assert!(inv_f <= 1e-2 * scale, "stationarity residual {inv_f:.3e}");
        assert!(div_f <= 1e-2 * scale, "divergence residual {div_f:.3e}");
        assert!(inv_f < inv_c, "no refinement gain: {inv_c:.3e} -> {inv_f:.3e}");
        assert!(div_f < div_c, "no refinement gain: {div_c:.3e} -> {div_f:.3e}");
    }

    #[test]
    fn form_diagonal_matches_gradient_energy() {
        let rho = ScalarField::one(2);
        let mesh = mesh_disk(1.0, 0.02).unwrap();
        let f = TestFunction::new([0.1, 0.0], 0.35).unwrap();
        let direct = integrate_nodes(&mesh, |p| {
            let g = f.gradient(p);
            Ok(Some(0.5 * (g[0] * g[0] + g[1] * g[1])))
        })
        .unwrap();
        assert!(direct > 0.0);

        // No rotation: the form is exactly the gradient energy.
        let cs = example("identity").unwrap();
        let e = dirichlet_form(&cs, &rho, &f, &f, &mesh).unwrap();
        assert!((e - direct).abs() <= 1e-12 * direct, "{e} vs {direct}");

        // Rotational part present: it cancels on the diagonal pointwise, so
        // the value still matches the gradient energy to rounding.
        let cs = example("infsin").unwrap();
        let e = dirichlet_form(&cs, &rho, &f, &f, &mesh).unwrap();
        assert!((e - direct).abs() <= 1e-10 * direct, "{e} vs {direct}");
    }

    #[test]
    fn disjoint_supports_vanish_bitwise() {
        let cs = example("ou").unwrap();
        let rho = gaussian_field();
        let mesh = mesh_disk(1.0, 0.05).unwrap();
        let f = TestFunction::new([0.45, 0.0], 0.2).unwrap();
        let g = TestFunction::new([-0.45, 0.0], 0.2).unwrap();
        let e = dirichlet_form(&cs, &rho, &f, &g, &mesh).unwrap();
        assert_eq!(e, 0.0);
        let (g1, g2) = adjoint_gap(&cs, &rho, &f, &g, &mesh).unwrap();
        assert_eq!(g1, 0.0);
        assert_eq!(g2, 0.0);
    }

    #[test]
    fn form_is_bilinear() {
        let cs = example("ou").unwrap();
        let rho = gaussian_field();
        let mesh = mesh_disk(1.0, 0.04).unwrap();
        let f1 = TestFunction::new([0.1, 0.1], 0.3).unwrap();
        let f2 = TestFunction::new([-0.15, 0.0], 0.25).unwrap();
        let g = TestFunction::new([0.0, -0.1], 0.35).unwrap();
        let (a, b) = (2.5, -0.75);
        let combo = Combo { a, f1, b, f2 };
        let lhs = dirichlet_form(&cs, &rho, &combo, &g, &mesh).unwrap();
        let e1 = dirichlet_form(&cs, &rho, &f1, &g, &mesh).unwrap();
        let e2 = dirichlet_form(&cs, &rho, &f2, &g, &mesh).unwrap();
        let rhs = a * e1 + b * e2;
        assert!(
            (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()),
            "{lhs} vs {rhs}"
        );
    }

    #[test]
    fn support_validation() {
        let cs = example("identity").unwrap();
        let rho = ScalarField::one(2);
        let mesh = mesh_disk(1.0, 0.1).unwrap();

        let escaping = TestFunction::new([0.8, 0.0], 0.3).unwrap();
        assert!(matches!(
            invariance_residual(&cs, &rho, &escaping, &mesh),
            Err(VerifyError::SupportEscapes { .. })
        ));

        // A density only defined on a small disk rejects bumps reaching
        // beyond it even when the quadrature mesh is large enough.
        let small = ScalarField::one(2).with_domain_radius(0.5);
        let phi = TestFunction::new([0.35, 0.0], 0.3).unwrap();
        match dirichlet_form(&cs, &small, &phi, &phi, &mesh) {
            Err(VerifyError::SupportEscapes { limit, .. }) => assert_eq!(limit, 0.5),
            other => panic!("expected support escape, got {other:?}"),
        }

        assert!(TestFunction::new([0.0, 0.0], -1.0).is_err());
        assert!(TestFunction::new([f64::NAN, 0.0], 0.1).is_err());
    }

    #[test]
    fn suite_rows_all_pass_for_gaussian() {
        let cs = example("ou").unwrap();
        let rho = gaussian_field();
        let mesh = mesh_disk(1.0, 0.02).unwrap();
        let bumps = bump_suite(1.0, 10, 7).unwrap();
        let rows = verify_suite(&cs, &rho, &mesh, &bumps, 1e-2).unwrap();
        assert_eq!(rows.len(), 10);
        for row in &rows {
            assert!(row.pass, "row {} failed: {row:?}", row.test_id);
            assert!(row.tolerance > 0.0 && row.tolerance_adjoint > 0.0);
        }
        // Bit-identical on a second run: the quadrature order is fixed and
        // the per-bump work is sequential.
        let again = verify_suite(&cs, &rho, &mesh, &bumps, 1e-2).unwrap();
        for (r1, r2) in rows.iter().zip(&again) {
            assert_eq!(r1.residual_inv, r2.residual_inv);
            assert_eq!(r1.residual_divfree, r2.residual_divfree);
            assert_eq!(r1.adjoint_gap_l, r2.adjoint_gap_l);
            assert_eq!(r1.adjoint_gap_lhat, r2.adjoint_gap_lhat);
        }
    }

    #[test]
    fn bump_suite_is_seeded_and_in_bounds() {
        let a = bump_suite(1.0, 10, 42).unwrap();
        let b = bump_suite(1.0, 10, 42).unwrap();
        let c = bump_suite(1.0, 10, 43).unwrap();
        assert_eq!(a.len(), 10);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.center(), y.center());
            assert_eq!(x.radius(), y.radius());
        }
        assert!(a.iter().zip(&c).any(|(x, y)| x.center() != y.center()));
        for bump in &a {
            let [cx, cy] = bump.center();
            let dist = (cx * cx + cy * cy).sqrt();
            assert!(dist <= 0.5 + 1e-12);
            assert!((0.1..=0.3).contains(&bump.radius()));
            assert!(dist + bump.radius() < 1.0);
        }
    }
}
