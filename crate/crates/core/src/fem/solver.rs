//! Sparse nonsymmetric linear solves.
//!
//! The primary path is BiCGStab preconditioned with an incomplete LU
//! factorisation on the matrix pattern (ILU(0)). Convergence is declared on
//! the *true* residual `||A x - b||_2 <= 1e-8 * (1 + ||b||_2)`; if the
//! iteration stalls at the floating-point residual floor first, a normwise
//! backward-error criterion accepts the solution instead (the ball problems
//! of the density builder can have interior/boundary value ratios of 1e10 or
//! more, where the absolute tolerance sits below what f64 arithmetic can
//! represent — see `converged_by` in [`SolveInfo`]). Systems below 20 000
//! unknowns fall back to a dense LU decomposition when the iteration fails
//! outright.

use super::csr::CsrMatrix;
use super::FemError;
use crate::linalg::{dot, norm2};

/// Residual tolerance: `||Ax - b||_2 <= RTOL * (1 + ||b||_2)`.
const RTOL: f64 = 1e-8;
/// Iteration cap for BiCGStab.
const MAX_ITERS: usize = 10_000;
/// Dense-fallback size limit (number of unknowns).
const DENSE_FALLBACK_LIMIT: usize = 20_000;
/// Normwise backward-error acceptance when the absolute tolerance is below
/// the rounding floor: `||r||_2 <= BW_TOL * (||A||_F ||x||_2 + ||b||_2)`.
const BW_TOL: f64 = 1e-13;

/// How a solve reached its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergedBy {
    /// True residual met the absolute tolerance.
    ResidualTolerance,
    /// Residual stalled at the f64 floor but the normwise backward error is
    /// at rounding level; the returned solution is backward stable.
    BackwardError,
    /// Dense LU fallback.
    DenseFallback,
}

#[derive(Debug, Clone)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Final true residual `||A x - b||_2`.
    pub residual: f64,
    /// Residual tolerance that applied to this system.
    pub tolerance: f64,
    /// Normwise backward error `||r|| / (||A||_F ||x|| + ||b||)`.
    pub backward_error: f64,
    pub converged_by: ConvergedBy,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub rtol: f64,
    /// Allow the dense fallback for systems under the size limit.
    pub allow_dense_fallback: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: MAX_ITERS,
            rtol: RTOL,
            allow_dense_fallback: true,
        }
    }
}

/// Solve `matrix * x = rhs` for a general sparse nonsymmetric system.
pub fn solve_csr(
    matrix: &CsrMatrix,
    rhs: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveInfo), FemError> {
    let n = matrix.n();
    if rhs.len() != n {
        return Err(FemError::BadSystem {
            message: format!("rhs length {} does not match system size {n}", rhs.len()),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(FemError::BadSystem {
            message: "rhs contains a non-finite entry".to_string(),
        });
    }
    let tol = opts.rtol * (1.0 + norm2(rhs));

    // Trivial zero solution: homogeneous systems arise whenever the drift
    // vanishes and should cost nothing.
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok((
            vec![0.0; n],
            SolveInfo {
                iterations: 0,
                residual: 0.0,
                tolerance: tol,
                backward_error: 0.0,
                converged_by: ConvergedBy::ResidualTolerance,
            },
        ));
    }

    let precond = Ilu0::factor(matrix);
    match bicgstab(matrix, rhs, &precond, opts, tol) {
        Ok(res) => Ok(res),
        Err(iter_err) => {
            if opts.allow_dense_fallback && n < DENSE_FALLBACK_LIMIT {
                dense_fallback(matrix, rhs, tol).map_err(|_| iter_err)
            } else {
                Err(iter_err)
            }
        }
    }
}

fn dense_fallback(
    matrix: &CsrMatrix,
    rhs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveInfo), FemError> {
    let dense = matrix.to_dense();
    let b = nalgebra::DVector::from_column_slice(rhs);
    let lu = dense.lu();
    let x = lu.solve(&b).ok_or(FemError::SolveFailed {
        iterations: 0,
        residual: f64::INFINITY,
        tolerance: tol,
    })?;
    let xv: Vec<f64> = x.iter().cloned().collect();
    let r = residual_norm(matrix, &xv, rhs);
    if !r.is_finite() {
        return Err(FemError::SolveFailed {
            iterations: 0,
            residual: r,
            tolerance: tol,
        });
    }
    let bw = r / (matrix.frobenius_norm() * norm2(&xv) + norm2(rhs)).max(f64::MIN_POSITIVE);
    if r > tol && bw > 1e-10 {
        // Direct solve of a numerically singular system: reject.
        return Err(FemError::SolveFailed {
            iterations: 0,
            residual: r,
            tolerance: tol,
        });
    }
    Ok((
        xv,
        SolveInfo {
            iterations: 0,
            residual: r,
            tolerance: tol,
            backward_error: bw,
            converged_by: ConvergedBy::DenseFallback,
        },
    ))
}

fn residual_norm(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    matrix.mul_vec_into(x, &mut ax);
    ax.iter()
        .zip(b)
        .map(|(a, bb)| (a - bb) * (a - bb))
        .sum::<f64>()
        .sqrt()
}

/// Right-preconditioned BiCGStab. Checks the recursive residual cheaply each
/// half step and confirms against the true residual before declaring success.
fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    m: &Ilu0,
    opts: &SolveOptions,
    tol: f64,
) -> Result<(Vec<f64>, SolveInfo), FemError> {
    let n = a.n();
    let a_norm = a.frobenius_norm();
    let b_norm = norm2(b);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec(); // r = b - A*0
    let mut r_hat = r.clone();
    let mut rho = dot(&r_hat, &r);
    let mut p = r.clone();

    let mut y = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];

    let mut best_x = x.clone();
    let mut best_res = f64::INFINITY;

    let accept = |x: &[f64], true_res: f64, iters: usize| -> Option<(Vec<f64>, SolveInfo)> {
        let bw = true_res / (a_norm * norm2(x) + b_norm).max(f64::MIN_POSITIVE);
        if true_res <= tol {
            Some((
                x.to_vec(),
                SolveInfo {
                    iterations: iters,
                    residual: true_res,
                    tolerance: tol,
                    backward_error: bw,
                    converged_by: ConvergedBy::ResidualTolerance,
                },
            ))
        } else if bw <= BW_TOL {
            Some((
                x.to_vec(),
                SolveInfo {
                    iterations: iters,
                    residual: true_res,
                    tolerance: tol,
                    backward_error: bw,
                    converged_by: ConvergedBy::BackwardError,
                },
            ))
        } else {
            None
        }
    };

    let mut iters = 0usize;
    while iters < opts.max_iters {
        iters += 1;

        m.apply(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let rhv = dot(&r_hat, &v);
        if rhv.abs() < f64::MIN_POSITIVE || !rhv.is_finite() {
            // Breakdown: restart from the current residual.
            r_hat.copy_from_slice(&r);
            rho = dot(&r_hat, &r);
            p.copy_from_slice(&r);
            if rho.abs() < f64::MIN_POSITIVE {
                break;
            }
            continue;
        }
        let alpha = rho / rhv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= 0.5 * tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let true_res = residual_norm(a, &x, b);
            if let Some(ok) = accept(&x, true_res, iters) {
                return Ok(ok);
            }
            // Half-step convergence was optimistic: restart the recursion
            // from the current residual.
            r.copy_from_slice(&s);
            r_hat.copy_from_slice(&r);
            rho = dot(&r_hat, &r);
            p.copy_from_slice(&r);
        } else {
            m.apply(&s, &mut z);
            a.mul_vec_into(&z, &mut t);
            let tt = dot(&t, &t);
            let omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            if omega == 0.0 || !omega.is_finite() {
                r_hat.copy_from_slice(&r);
                rho = dot(&r_hat, &r);
                p.copy_from_slice(&r);
                continue;
            }
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            let rec_res = norm2(&r);
            if rec_res <= tol || iters % 50 == 0 {
                let true_res = residual_norm(a, &x, b);
                if true_res < best_res {
                    best_res = true_res;
                    best_x.copy_from_slice(&x);
                }
                if let Some(ok) = accept(&x, true_res, iters) {
                    return Ok(ok);
                }
            }
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < f64::MIN_POSITIVE || !rho_new.is_finite() {
                r_hat.copy_from_slice(&r);
                rho = dot(&r_hat, &r);
                p.copy_from_slice(&r);
                continue;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            if p.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
    }

    // Out of iterations: one last look at the best iterate seen.
    let true_res = residual_norm(a, &best_x, b);
    if let Some(ok) = accept(&best_x, true_res, iters) {
        return Ok(ok);
    }
    Err(FemError::SolveFailed {
        iterations: iters,
        residual: best_res.min(true_res),
        tolerance: tol,
    })
}

/// Incomplete LU factorisation with zero fill-in, stored on the matrix
/// pattern. `L` has unit diagonal; `U`'s diagonal is stored explicitly.
struct Ilu0 {
    lu: CsrMatrix,
    diag_ptr: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &CsrMatrix) -> Self {
        let n = a.n();
        let mut lu = a.clone();

        // Position of the diagonal within each row (insert pattern must
        // contain it; FEM rows always do, but fall back gracefully).
        let mut diag_ptr = vec![usize::MAX; n];
        for i in 0..n {
            let (cols, _) = lu.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                diag_ptr[i] = lu.row_ptr()[i] + k;
            }
        }

        // IKJ-variant restricted to the sparsity pattern, using a scatter
        // buffer for the active row.
        let mut scatter: Vec<f64> = vec![0.0; n];
        let mut marker: Vec<i64> = vec![-1; n];
        for i in 0..n {
            let (row_start, row_end) = (lu.row_ptr()[i], lu.row_ptr()[i + 1]);
            let cols: Vec<usize> = lu.col_idx()[row_start..row_end].to_vec();
            for (k, &c) in cols.iter().enumerate() {
                scatter[c] = lu.values()[row_start + k];
                marker[c] = i as i64;
            }
            for &k in cols.iter().filter(|&&c| c < i) {
                let dk = diag_ptr[k];
                if dk == usize::MAX {
                    continue;
                }
                let pivot = lu.values()[dk];
                let safe_pivot = if pivot.abs() < 1e-300 { 1.0 } else { pivot };
                let factor = scatter[k] / safe_pivot;
                scatter[k] = factor;
                // Subtract factor * U[k, j] for j > k within the pattern.
                let (k_start, k_end) = (lu.row_ptr()[k], lu.row_ptr()[k + 1]);
                for idx in k_start..k_end {
                    let j = lu.col_idx()[idx];
                    if j > k && marker[j] == i as i64 {
                        scatter[j] -= factor * lu.values()[idx];
                    }
                }
            }
            for (k, &c) in cols.iter().enumerate() {
                lu.values_mut()[row_start + k] = scatter[c];
            }
        }
        Ilu0 { lu, diag_ptr }
    }

    /// `out = U^{-1} L^{-1} rhs`.
    fn apply(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.lu.n();
        out.copy_from_slice(rhs);
        // Forward: L has unit diagonal, strictly-lower entries are cols < i.
        for i in 0..n {
            let (cols, vals) = self.lu.row(i);
            let mut acc = out[i];
            for (&c, &v) in cols.iter().zip(vals) {
                if c < i {
                    acc -= v * out[c];
                }
            }
            out[i] = acc;
        }
        // Backward with U (diagonal included).
        for i in (0..n).rev() {
            let (cols, vals) = self.lu.row(i);
            let mut acc = out[i];
            for (&c, &v) in cols.iter().zip(vals) {
                if c > i {
                    acc -= v * out[c];
                }
            }
            let d = if self.diag_ptr[i] == usize::MAX {
                1.0
            } else {
                let dv = self.lu.values()[self.diag_ptr[i]];
                if dv.abs() < 1e-300 {
                    1.0
                } else {
                    dv
                }
            };
            out[i] = acc / d;
        }
    }
}

/// Solve a [`super::LinearSystem`]: runs the sparse solver and re-imposes the
/// constrained values exactly, returning the nodal solution as a
/// [`super::FemFunction`] on the system's mesh.
pub fn solve(
    system: &super::LinearSystem,
) -> Result<(super::FemFunction, SolveInfo), FemError> {
    let (mut x, info) = solve_csr(&system.matrix, &system.rhs, &SolveOptions::default())?;
    // Constrained values are known exactly; the iterative solution only
    // approximates its identity rows.
    for (&v, &val) in system.dirichlet.iter() {
        x[v] = val;
    }
    Ok((super::FemFunction::new(system.mesh.clone(), x)?, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tridiagonal Poisson-style system; the answer is checked against a
    /// dense LU oracle.
    #[test]
    fn tridiagonal_matches_direct_solve() {
        let n = 200;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i > 0 {
                trips.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, trips).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.1).sin()).collect();
        let (x, info) = solve_csr(&a, &b, &SolveOptions::default()).unwrap();
        assert!(info.residual <= info.tolerance);

        let dense = a.to_dense();
        let bd = nalgebra::DVector::from_column_slice(&b);
        let xd = dense.lu().solve(&bd).unwrap();
        let worst = x
            .iter()
            .zip(xd.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "max deviation {worst} from direct solve");
    }

    #[test]
    fn identity_system_is_immediate() {
        let n = 10;
        let a = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0))).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (x, info) = solve_csr(&a, &b, &SolveOptions::default()).unwrap();
        assert!(info.residual <= info.tolerance);
        for i in 0..n {
            assert!((x[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_returns_zero_immediately() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0)]).unwrap();
        let (x, info) = solve_csr(&a, &[0.0, 0.0, 0.0], &SolveOptions::default()).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 0.0]);
        assert_eq!(info.iterations, 0);
    }

    #[test]
    fn singular_duplicated_row_fails() {
        // Rows 1 and 2 identical -> singular.
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 0, 1.0),
                (1, 0, 1.0),
                (1, 1, 2.0),
                (2, 0, 1.0),
                (2, 1, 2.0),
            ],
        )
        .unwrap();
        let b = vec![1.0, 2.0, 3.0]; // inconsistent with the duplicate row
        match solve_csr(&a, &b, &SolveOptions::default()) {
            Err(FemError::SolveFailed { residual, .. }) => {
                assert!(residual.is_finite() || residual.is_infinite())
            }
            other => panic!("expected SolveFailed, got {other:?}"),
        }
    }

    #[test]
    fn nonsymmetric_convection_like_system_converges() {
        // 2D 5-point stencil with a skew term, lexicographic ordering.
        let m = 30;
        let n = m * m;
        let mut trips = Vec::new();
        let idx = |i: usize, j: usize| i * m + j;
        for i in 0..m {
            for j in 0..m {
                let row = idx(i, j);
                trips.push((row, row, 4.0));
                let mut off = |r: usize, v: f64| trips.push((row, r, v));
                if i > 0 {
                    off(idx(i - 1, j), -1.0 - 0.3);
                }
                if i + 1 < m {
                    off(idx(i + 1, j), -1.0 + 0.3);
                }
                if j > 0 {
                    off(idx(i, j - 1), -1.0 - 0.2);
                }
                if j + 1 < m {
                    off(idx(i, j + 1), -1.0 + 0.2);
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, trips).unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let (x, info) = solve_csr(&a, &b, &SolveOptions::default()).unwrap();
        assert!(info.residual <= info.tolerance, "residual {}", info.residual);
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
