//! Drift fields derived from a coefficient triple and a candidate density.

use super::fields::{FieldValue, MatrixField, ScalarField};
use super::{CoeffError, CoefficientSet};
use crate::linalg::SquareMat;

/// Non-divergence drift `G = (1/2) div(A + C^T) + H`.
///
/// Antisymmetry of `C` gives `div(C^T) = -div(C)`, so only the fields' own
/// divergences are needed. Evaluations inside a declared singular set (or
/// yielding non-finite components) are refused unless `allow_singular` is
/// set, in which case the flag is propagated on the returned value.
pub fn drift_g(
    cs: &CoefficientSet,
    x: &[f64],
    allow_singular: bool,
) -> Result<FieldValue<Vec<f64>>, CoeffError> {
    let div_a = cs.a().divergence(x);
    let div_c = cs.c().divergence(x);
    let h = cs.h().eval(x);
    let d = cs.dim();
    let mut value = vec![0.0; d];
    for i in 0..d {
        value[i] = 0.5 * (div_a.value[i] - div_c.value[i]) + h.value[i];
    }
    let singular = div_a.singular || div_c.singular || h.singular;
    if singular && !allow_singular {
        return Err(CoeffError::SingularPoint {
            point: x.to_vec(),
            what: describe_singularity(cs, x),
        });
    }
    Ok(FieldValue { value, singular })
}

fn describe_singularity(cs: &CoefficientSet, x: &[f64]) -> String {
    for (field, region) in [
        ("diffusion matrix divergence", cs.a().singular_set()),
        ("antisymmetric part divergence", cs.c().singular_set()),
        ("drift", cs.h().singular_set()),
    ] {
        if let Some(r) = region {
            if r.contains(x) {
                return format!("{field} ({})", r.description);
            }
        }
    }
    "a non-finite field evaluation".to_string()
}

/// Logarithmic derivative of `rho` along the matrix field `m`:
/// `beta^{rho,M}(x) = (1/2)(div M + M grad rho / rho)`.
///
/// `rho` must be strictly positive at `x` and must carry a gradient
/// (analytic, or recovered from a finite-element solution).
pub fn log_derivative(
    m: &MatrixField,
    rho: &ScalarField,
    x: &[f64],
) -> Result<FieldValue<Vec<f64>>, CoeffError> {
    let rho_x = rho.eval(x);
    if !(rho_x > 0.0) || !rho_x.is_finite() {
        return Err(CoeffError::NonPositiveDensity {
            point: x.to_vec(),
            value: rho_x,
        });
    }
    let grad_rho = rho.grad(x).ok_or_else(|| CoeffError::MissingGradient {
        what: "logarithmic derivative".to_string(),
    })?;
    let div_m = m.divergence(x);
    let mval = m.eval(x);
    let d = m.dim();
    let mut value = vec![0.0; d];
    let mut m_grad = vec![0.0; d];
    mval.mul_vec_into(&grad_rho, &mut m_grad);
    for i in 0..d {
        value[i] = 0.5 * (div_m.value[i] + m_grad[i] / rho_x);
    }
    let singular = div_m.singular || value.iter().any(|v| !v.is_finite());
    Ok(FieldValue { value, singular })
}

/// The full family of drifts derived from `(A, C, H)` and a density `rho`.
///
/// All members are definitions, not approximations:
///
/// * `g`          — non-divergence drift of the process,
/// * `beta_a`     — `beta^{rho, A}`,
/// * `beta_act`   — `beta^{rho, A + C^T}`,
/// * `bbar`       — `g - beta_act` (vanishes for densities satisfying the
///   weak divergence equation with vanishing antisymmetric flux),
/// * `ghat`       — `2 beta_a - g`, the drift of the co-process,
/// * `fhat`       — `(1/2) div(A + C) - ghat`.
#[derive(Debug, Clone)]
pub struct DerivedDrifts {
    pub g: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub beta_act: Vec<f64>,
    pub bbar: Vec<f64>,
    pub ghat: Vec<f64>,
    pub fhat: Vec<f64>,
    /// Any contributing field was flagged singular at this point.
    pub singular: bool,
}

/// Evaluate every derived drift at `x`. Requires `rho > 0` at `x` and a
/// gradient for `rho`.
pub fn derived_drifts(
    cs: &CoefficientSet,
    rho: &ScalarField,
    x: &[f64],
    allow_singular: bool,
) -> Result<DerivedDrifts, CoeffError> {
    let d = cs.dim();
    let rho_x = rho.eval(x);
    if !(rho_x > 0.0) || !rho_x.is_finite() {
        return Err(CoeffError::NonPositiveDensity {
            point: x.to_vec(),
            value: rho_x,
        });
    }
    let grad_rho = rho.grad(x).ok_or_else(|| CoeffError::MissingGradient {
        what: "derived drifts".to_string(),
    })?;

    let div_a = cs.a().divergence(x);
    let div_c = cs.c().divergence(x);
    let h = cs.h().eval(x);
    let a_val = cs.a().eval(x);
    let c_val = cs.c().eval(x);

    let singular = div_a.singular || div_c.singular || h.singular;
    if singular && !allow_singular {
        return Err(CoeffError::SingularPoint {
            point: x.to_vec(),
            what: describe_singularity(cs, x),
        });
    }

    // (A + C^T) = A - C for antisymmetric C.
    let a_minus_c = a_val.sub(&c_val);

    let mut g = vec![0.0; d];
    for i in 0..d {
        g[i] = 0.5 * (div_a.value[i] - div_c.value[i]) + h.value[i];
    }

    let beta_of = |m: &SquareMat, div_m: &[f64]| -> Vec<f64> {
        let mut mg = vec![0.0; d];
        m.mul_vec_into(&grad_rho, &mut mg);
        (0..d)
            .map(|i| 0.5 * (div_m[i] + mg[i] / rho_x))
            .collect()
    };

    let beta_a = beta_of(&a_val, &div_a.value);
    let div_act: Vec<f64> = (0..d).map(|i| div_a.value[i] - div_c.value[i]).collect();
    let beta_act = beta_of(&a_minus_c, &div_act);

    let bbar: Vec<f64> = (0..d).map(|i| g[i] - beta_act[i]).collect();
    let ghat: Vec<f64> = (0..d).map(|i| 2.0 * beta_a[i] - g[i]).collect();
    let fhat: Vec<f64> = (0..d)
        .map(|i| 0.5 * (div_a.value[i] + div_c.value[i]) - ghat[i])
        .collect();

    Ok(DerivedDrifts {
        g,
        beta_a,
        beta_act,
        bbar,
        ghat,
        fhat,
        singular,
    })
}
