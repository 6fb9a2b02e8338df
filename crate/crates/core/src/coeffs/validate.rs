//! Structural checks on a coefficient triple over a sampling grid.
//!
//! The checks are necessarily pointwise: a lattice over a closed ball,
//! augmented with points exactly on the boundary sphere, probes symmetry of
//! `A`, antisymmetry of `C`, two-sided ellipticity bounds along a fixed set
//! of unit directions, and finiteness of values and divergences. Points
//! inside a declared singular set keep their value probes but skip the
//! derivative probes, and are counted in the report.

use std::collections::HashSet;

use super::fields::GradMethod;
use super::{CoeffError, CoefficientSet};
use crate::linalg::norm2;

/// Defect tolerance, relative to the largest entry probed.
const DEFECT_RTOL: f64 = 1e-12;

/// Maximum number of lattice candidates a grid may generate.
const MAX_GRID_POINTS: f64 = 2e6;

/// A sampling grid: the lattice `step * Z^d` clipped to the closed ball of
/// the given radius, plus boundary points along the test directions.
#[derive(Debug, Clone, Copy)]
pub struct ValidationGrid {
    pub radius: f64,
    pub step: f64,
}

impl ValidationGrid {
    pub fn new(radius: f64, step: f64) -> Result<Self, CoeffError> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(CoeffError::BadParameter {
                name: "radius".to_string(),
                message: format!("must be positive and finite, got {radius}"),
            });
        }
        if !step.is_finite() || step <= 0.0 || step > radius {
            return Err(CoeffError::BadParameter {
                name: "step".to_string(),
                message: format!("must lie in (0, radius], got {step}"),
            });
        }
        Ok(ValidationGrid { radius, step })
    }

    /// All probe points, deduplicated bitwise.
    pub fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>, CoeffError> {
        let n = (self.radius / self.step).round() as i64;
        let per_axis = 2 * n + 1;
        if (per_axis as f64).powi(dim as i32) > MAX_GRID_POINTS {
            return Err(CoeffError::BadParameter {
                name: "step".to_string(),
                message: format!(
                    "grid would have about {per_axis}^{dim} candidates; coarsen the step"
                ),
            });
        }
        let mut pts = Vec::new();
        let mut cur = vec![0.0; dim];
        self.fill_lattice(&mut pts, &mut cur, 0, n, dim);
        for u in directions(dim) {
            pts.push(u.iter().map(|c| c * self.radius).collect());
        }
        let mut seen = HashSet::new();
        pts.retain(|p| seen.insert(p.iter().map(|c| c.to_bits()).collect::<Vec<_>>()));
        Ok(pts)
    }

    fn fill_lattice(
        &self,
        pts: &mut Vec<Vec<f64>>,
        cur: &mut Vec<f64>,
        axis: usize,
        n: i64,
        dim: usize,
    ) {
        if axis == dim {
            if norm2(cur) <= self.radius * (1.0 + 1e-12) {
                pts.push(cur.clone());
            }
            return;
        }
        for k in -n..=n {
            cur[axis] = k as f64 * self.step;
            self.fill_lattice(pts, cur, axis + 1, n, dim);
        }
        cur[axis] = 0.0;
    }
}

/// Unit directions for the ellipticity probes: 16 equally spaced angles in
/// the plane; axes and normalized two-axis diagonals in other dimensions.
fn directions(dim: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..16)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut dirs = Vec::new();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        dirs.push(e);
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = inv_sqrt2;
                e[j] = sign * inv_sqrt2;
                dirs.push(e);
            }
        }
    }
    dirs
}

/// Outcome of the grid checks. `passed` holds exactly when `failures` is
/// empty; the bounds and defects are reported either way.
#[derive(Debug)]
pub struct ValidationReport {
    pub example: String,
    pub dim: usize,
    pub radius: f64,
    pub points_checked: usize,
    /// Smallest value of `u^T A(x) u` seen over the grid and directions.
    pub lambda_min: f64,
    /// Largest such value.
    pub lambda_max: f64,
    /// Largest `|a_ij - a_ji|` seen.
    pub symmetry_defect: f64,
    /// Largest `|c_ij + c_ji|` seen.
    pub antisymmetry_defect: f64,
    pub divergence_method_a: GradMethod,
    pub divergence_method_c: GradMethod,
    /// Points inside a declared singular set; value probes still ran there,
    /// derivative probes did not.
    pub singular_points_skipped: usize,
    pub p_exponent: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: {} points on |x| <= {}, u^T A u in [{:.6e}, {:.6e}], \
             symmetry defect {:.3e}, antisymmetry defect {:.3e}, \
             {} singular points skipped, {}",
            self.example,
            self.points_checked,
            self.radius,
            self.lambda_min,
            self.lambda_max,
            self.symmetry_defect,
            self.antisymmetry_defect,
            self.singular_points_skipped,
            if self.passed { "passed" } else { "FAILED" },
        )
    }
}

/// Run all grid checks on a coefficient triple.
pub fn validate_coefficients(
    cs: &CoefficientSet,
    grid: &ValidationGrid,
) -> Result<ValidationReport, CoeffError> {
    let dim = cs.dim();
    let points = grid.points(dim)?;
    let dirs = directions(dim);

    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    let mut symmetry_defect: f64 = 0.0;
    let mut antisymmetry_defect: f64 = 0.0;
    let mut max_entry: f64 = 0.0;
    let mut skipped = 0usize;
    let mut failures = Vec::new();
    let mut divergence_failures = 0usize;

    for x in &points {
        let a = cs.a().eval(x);
        if !a.is_finite() {
            return Err(CoeffError::NonFinite {
                point: x.clone(),
                what: "the diffusion matrix A".to_string(),
            });
        }
        let c = cs.c().eval(x);
        if !c.is_finite() {
            return Err(CoeffError::NonFinite {
                point: x.clone(),
                what: "the antisymmetric part C".to_string(),
            });
        }
        symmetry_defect = symmetry_defect.max(a.asymmetry());
        antisymmetry_defect = antisymmetry_defect.max(c.antisymmetry_defect());
        max_entry = max_entry.max(a.max_abs()).max(c.max_abs());
        for u in &dirs {
            let q = a.quad_form(u);
            lambda_min = lambda_min.min(q);
            lambda_max = lambda_max.max(q);
        }

        let declared_singular = [
            cs.a().singular_set(),
            cs.c().singular_set(),
            cs.h().singular_set(),
        ]
        .iter()
        .flatten()
        .any(|r| r.contains(x));
        if declared_singular {
            skipped += 1;
            continue;
        }

        let h = cs.h().eval(x);
        if h.value.iter().any(|v| !v.is_finite()) {
            return Err(CoeffError::NonFinite {
                point: x.clone(),
                what: "the drift H".to_string(),
            });
        }
        for (div, name) in [(cs.a().divergence(x), "A"), (cs.c().divergence(x), "C")] {
            if div.singular {
                divergence_failures += 1;
                if divergence_failures <= 5 {
                    failures.push(format!(
                        "divergence of {name} is singular at {x:?}, outside any declared \
                         singular set"
                    ));
                }
            }
        }
    }

    let defect_tol = DEFECT_RTOL * (1.0 + max_entry);
    if !(lambda_min > 0.0) {
        failures.push(format!(
            "A is not uniformly elliptic on the grid: min u^T A u = {lambda_min:.6e}"
        ));
    }
    if !lambda_max.is_finite() {
        failures.push("u^T A u is unbounded on the grid".to_string());
    }
    if symmetry_defect > defect_tol {
        failures.push(format!(
            "A is not symmetric: max |a_ij - a_ji| = {symmetry_defect:.6e}"
        ));
    }
    if antisymmetry_defect > defect_tol {
        failures.push(format!(
            "C is not antisymmetric: max |c_ij + c_ji| = {antisymmetry_defect:.6e}"
        ));
    }
    if divergence_failures > 5 {
        failures.push(format!(
            "... and {} more undeclared singular divergence values",
            divergence_failures - 5
        ));
    }

    Ok(ValidationReport {
        example: cs.name().to_string(),
        dim,
        radius: grid.radius,
        points_checked: points.len(),
        lambda_min,
        lambda_max,
        symmetry_defect,
        antisymmetry_defect,
        divergence_method_a: cs.a().grad_method(),
        divergence_method_c: cs.c().grad_method(),
        singular_points_skipped: skipped,
        p_exponent: cs.p_exponent(),
        passed: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{example, example_names, MatrixField, VectorField};
    use crate::linalg::SquareMat;

    fn triple_with_a(a: MatrixField) -> CoefficientSet {
        let dim = a.dim();
        CoefficientSet::new(
            "test",
            a,
            MatrixField::constant(dim, SquareMat::zeros(dim)),
            VectorField::zero(dim),
            dim as f64 + 2.0,
        )
        .unwrap()
    }

    #[test]
    fn scaled_identity_bounds_on_a_disk_of_radius_two() {
        // A = (1 + ||x||^2) I on |x| <= 2: quadratic form ranges over [1, 5].
        let a = MatrixField::new(2, |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            SquareMat::identity(2).scale(1.0 + r2)
        });
        let cs = triple_with_a(a);
        let grid = ValidationGrid::new(2.0, 0.5).unwrap();
        let report = validate_coefficients(&cs, &grid).unwrap();
        assert!(report.passed, "{:?}", report.failures);
        assert!((report.lambda_min - 1.0).abs() < 1e-14, "{}", report.lambda_min);
        assert!((report.lambda_max - 5.0).abs() < 5e-14, "{}", report.lambda_max);
        assert_eq!(report.symmetry_defect, 0.0);
        assert_eq!(report.antisymmetry_defect, 0.0);
        assert_eq!(report.divergence_method_a, GradMethod::FiniteDifference);
        assert_eq!(report.singular_points_skipped, 0);
    }

    #[test]
    fn every_registry_example_passes() {
        let grid = ValidationGrid::new(2.0, 0.5).unwrap();
        for name in example_names() {
            let cs = example(name).unwrap();
            let report = validate_coefficients(&cs, &grid).unwrap();
            assert!(report.passed, "{name}: {:?}", report.failures);
            assert!(report.lambda_min >= 1.0 - 1e-14, "{name}");
        }
    }

    #[test]
    fn declared_singular_segments_are_skipped_and_counted() {
        // Grid points (0,0), (1,0), (2,0) sit on the declared segments; the
        // boundary probe at angle zero duplicates the lattice point (2,0).
        let cs = example("infsin").unwrap();
        let grid = ValidationGrid::new(2.0, 0.5).unwrap();
        let report = validate_coefficients(&cs, &grid).unwrap();
        assert_eq!(report.singular_points_skipped, 3);
        assert!(report.passed, "{:?}", report.failures);
        assert_eq!(report.divergence_method_c, GradMethod::Analytic);
    }

    #[test]
    fn non_finite_matrix_entries_name_the_point() {
        let a = MatrixField::new(2, |x: &[f64]| {
            let mut m = SquareMat::identity(2);
            m.set(0, 0, 1.0 / x[0]);
            m
        });
        let cs = triple_with_a(a);
        let grid = ValidationGrid::new(1.0, 0.5).unwrap();
        let err = validate_coefficients(&cs, &grid).unwrap_err();
        match err {
            CoeffError::NonFinite { point, what } => {
                assert_eq!(point[0], 0.0);
                assert!(what.contains('A'));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn asymmetric_a_fails_with_a_named_defect() {
        let mut m = SquareMat::identity(2);
        m.set(0, 1, 0.1);
        let cs = triple_with_a(MatrixField::constant(2, m));
        let grid = ValidationGrid::new(1.0, 0.5).unwrap();
        let report = validate_coefficients(&cs, &grid).unwrap();
        assert!(!report.passed);
        assert!((report.symmetry_defect - 0.1).abs() < 1e-15);
        assert!(report.failures.iter().any(|f| f.contains("symmetric")));
    }

    #[test]
    fn indefinite_a_fails_the_ellipticity_probe() {
        let mut m = SquareMat::identity(2);
        m.set(1, 1, -0.5);
        let cs = triple_with_a(MatrixField::constant(2, m));
        let grid = ValidationGrid::new(1.0, 0.5).unwrap();
        let report = validate_coefficients(&cs, &grid).unwrap();
        assert!(!report.passed);
        assert!(report.lambda_min < 0.0);
        assert!(report.failures.iter().any(|f| f.contains("elliptic")));
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(ValidationGrid::new(-1.0, 0.5).is_err());
        assert!(ValidationGrid::new(1.0, 0.0).is_err());
        assert!(ValidationGrid::new(1.0, 2.0).is_err());
        let fine = ValidationGrid::new(100.0, 1e-3).unwrap();
        assert!(fine.points(2).is_err(), "2e5 per axis must be refused");
    }
}
