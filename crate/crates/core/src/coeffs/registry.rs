//! Built-in example coefficient sets.

use super::fields::{FieldValue, MatrixField, Region, ScalarField, VectorField};
use super::{CoeffError, CoefficientSet};
use crate::linalg::SquareMat;

/// A registry entry: name, what the triple looks like, accepted parameters.
#[derive(Debug, Clone, Copy)]
pub struct ExampleInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub parameters: &'static str,
}

static EXAMPLE_INFOS: [ExampleInfo; 4] = [
    ExampleInfo {
        name: "identity",
        summary: "A = I, C = 0, H = 0; the flat density is invariant",
        parameters: "none",
    },
    ExampleInfo {
        name: "ou",
        summary: "A = I, C = 0, H = -theta x; Gaussian invariant density",
        parameters: "theta > 0 (default 1)",
    },
    ExampleInfo {
        name: "infsin",
        summary: "A = I, H = 0, antisymmetric C from a train of rotational \
                  bumps whose stream profile has infinite slope on segments \
                  x1 = 0, 1, 2, ...; the flat density is invariant",
        parameters: "none",
    },
    ExampleInfo {
        name: "growth-demo",
        summary: "A = sqrt(1 + ||x||^2) I (diffusion growing like ||x||), \
                  C = 0, H = -theta x",
        parameters: "theta > 0 (default 1)",
    },
];

impl ExampleInfo {
    pub fn all() -> &'static [ExampleInfo] {
        &EXAMPLE_INFOS
    }
}

/// Names of the built-in examples, in listing order.
pub fn example_names() -> Vec<&'static str> {
    EXAMPLE_INFOS.iter().map(|e| e.name).collect()
}

/// Build a built-in example with default parameters in dimension 2.
pub fn example(name: &str) -> Result<CoefficientSet, CoeffError> {
    example_in_dim(name, 2)
}

/// Build a built-in example with default parameters in dimension `dim`.
pub fn example_in_dim(name: &str, dim: usize) -> Result<CoefficientSet, CoeffError> {
    build(name, dim, None)
}

/// Build from a template string `name` or `name:key=value[,key=value]`,
/// e.g. `ou:theta=0.5`.
pub fn from_template(template: &str, dim: usize) -> Result<CoefficientSet, CoeffError> {
    let (name, params) = match template.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p)),
        None => (template.trim(), None),
    };
    let mut theta = None;
    if let Some(params) = params {
        for item in params.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, value) = item.split_once('=').ok_or_else(|| CoeffError::BadParameter {
                name: item.to_string(),
                message: "expected key=value".to_string(),
            })?;
            match key.trim() {
                "theta" => {
                    let t: f64 =
                        value.trim().parse().map_err(|_| CoeffError::BadParameter {
                            name: "theta".to_string(),
                            message: format!("cannot parse '{}' as a number", value.trim()),
                        })?;
                    if !t.is_finite() || t <= 0.0 {
                        return Err(CoeffError::BadParameter {
                            name: "theta".to_string(),
                            message: format!("must be a positive finite number, got {t}"),
                        });
                    }
                    theta = Some(t);
                }
                other => {
                    return Err(CoeffError::BadParameter {
                        name: other.to_string(),
                        message: format!("unknown parameter for example '{name}'"),
                    });
                }
            }
        }
    }
    build(name, dim, theta)
}

fn build(name: &str, dim: usize, theta: Option<f64>) -> Result<CoefficientSet, CoeffError> {
    if dim == 0 {
        return Err(CoeffError::DimensionMismatch {
            message: "dimension must be at least 1".to_string(),
        });
    }
    match name {
        "identity" => {
            reject_theta(name, theta)?;
            identity_example(dim)
        }
        "ou" => restoring_example("ou", dim, theta.unwrap_or(1.0), false),
        "infsin" => {
            reject_theta(name, theta)?;
            rotational_example(dim)
        }
        "growth-demo" => restoring_example("growth-demo", dim, theta.unwrap_or(1.0), true),
        other => Err(CoeffError::UnknownExample {
            name: other.to_string(),
            known: example_names().join(", "),
        }),
    }
}

fn reject_theta(name: &str, theta: Option<f64>) -> Result<(), CoeffError> {
    if theta.is_some() {
        return Err(CoeffError::BadParameter {
            name: "theta".to_string(),
            message: format!("example '{name}' takes no parameters"),
        });
    }
    Ok(())
}

fn identity_example(dim: usize) -> Result<CoefficientSet, CoeffError> {
    CoefficientSet::new(
        "identity",
        MatrixField::constant(dim, SquareMat::identity(dim)),
        MatrixField::constant(dim, SquareMat::zeros(dim)),
        VectorField::zero(dim),
        dim as f64 + 2.0,
    )
}

/// `H = -theta x`, with either constant identity diffusion or the unbounded
/// diffusion `sqrt(1 + ||x||^2) I`.
fn restoring_example(
    name: &str,
    dim: usize,
    theta: f64,
    growing_diffusion: bool,
) -> Result<CoefficientSet, CoeffError> {
    let a = if growing_diffusion {
        MatrixField::new(dim, move |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            SquareMat::identity(dim).scale((1.0 + r2).sqrt())
        })
        .with_divergence(move |x| {
            // d_i sqrt(1 + ||x||^2) = x_i / sqrt(1 + ||x||^2)
            let s = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
            FieldValue::regular(x.iter().map(|v| v / s).collect())
        })
    } else {
        MatrixField::constant(dim, SquareMat::identity(dim))
    };
    CoefficientSet::new(
        name,
        a,
        MatrixField::constant(dim, SquareMat::zeros(dim)),
        VectorField::new(dim, move |x| x.iter().map(|v| -theta * v).collect()),
        dim as f64 + 2.0,
    )
}

// ---------------------------------------------------------------------------
// Rotational-stream example.
//
// The stream function is v(x) = sum_{i >= 0} 2^{-i} w(x - i e1) with
// w(y) = eta(y) s(y1), where eta is a bump supported on ||y|| < 1/4 and s is
// the antiderivative of |t|^{-1/d} normalized to s(-1) = 0. The bumps have
// disjoint supports, so at most the term with i = round(x1) contributes and
// the series is evaluated exactly. The antisymmetric part puts v in the
// corner entries, C[0][d-1] = v, C[d-1][0] = -v; its divergence involves
// s'(y1) = |y1|^{-1/d}, which blows up on the segment y1 = 0 of each bump.
// ---------------------------------------------------------------------------

const BUMP_RADIUS_SQ: f64 = 0.0625; // (1/4)^2

/// `eta = exp(1 - 1/q)` with `q = 1 - 16 ||y||^2`. For `q <= 1e-6` the true
/// value is below 1e-434000 in magnitude; returning exact zero there keeps
/// the gradient prefactor `1/q^2` from ever meeting a nonzero multiplicand.
fn bump_weight(q: f64) -> f64 {
    if q <= 1e-6 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// Antiderivative of `|t|^{-1/d}` on (-1, 1), constant outside, `s(-1) = 0`.
fn smoothed_step(dim: usize, t: f64) -> f64 {
    let kappa = dim as f64 / (dim as f64 - 1.0);
    let e = 1.0 - 1.0 / dim as f64;
    if t <= -1.0 {
        0.0
    } else if t <= 0.0 {
        kappa * (1.0 - (-t).powf(e))
    } else if t < 1.0 {
        kappa * (1.0 + t.powf(e))
    } else {
        2.0 * kappa
    }
}

/// `s'(t) = |t|^{-1/d}` inside (-1, 1), zero outside; +inf at t = 0.
fn smoothed_step_deriv(dim: usize, t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        t.abs().powf(-1.0 / dim as f64)
    }
}

/// Index of the only bump whose support can contain `x`, if any.
fn active_bump(x1: f64) -> Option<i32> {
    let i = x1.round();
    // Beyond 2^-1030 the weight underflows to zero anyway.
    if i < 0.0 || i > 1030.0 {
        None
    } else {
        Some(i as i32)
    }
}

fn stream_value(dim: usize, x: &[f64]) -> f64 {
    let Some(i) = active_bump(x[0]) else {
        return 0.0;
    };
    let y1 = x[0] - i as f64;
    let r2 = y1 * y1 + x[1..].iter().map(|v| v * v).sum::<f64>();
    if r2 >= BUMP_RADIUS_SQ {
        return 0.0;
    }
    let eta = bump_weight(1.0 - 16.0 * r2);
    if eta == 0.0 {
        return 0.0;
    }
    0.5f64.powi(i) * eta * smoothed_step(dim, y1)
}

/// Gradient of the stream function; flagged (with infinite first component)
/// on the segments y1 = 0 inside a bump.
fn stream_grad(dim: usize, x: &[f64]) -> FieldValue<Vec<f64>> {
    let d = x.len();
    let mut out = vec![0.0; d];
    let Some(i) = active_bump(x[0]) else {
        return FieldValue::regular(out);
    };
    let y1 = x[0] - i as f64;
    let r2 = y1 * y1 + x[1..].iter().map(|v| v * v).sum::<f64>();
    if r2 >= BUMP_RADIUS_SQ {
        return FieldValue::regular(out);
    }
    let q = 1.0 - 16.0 * r2;
    let eta = bump_weight(q);
    if eta == 0.0 {
        return FieldValue::regular(out);
    }
    let scale = 0.5f64.powi(i);
    let s = smoothed_step(dim, y1);
    // grad eta = -32 y (1 - 16 ||y||^2)^{-2} eta
    let eta_factor = -32.0 * eta / (q * q);
    out[0] = scale * s * eta_factor * y1;
    for j in 1..d {
        out[j] = scale * s * eta_factor * x[j];
    }
    out[0] += scale * eta * smoothed_step_deriv(dim, y1);
    let singular = out.iter().any(|v| !v.is_finite());
    FieldValue { value: out, singular }
}

fn rotational_example(dim: usize) -> Result<CoefficientSet, CoeffError> {
    if dim < 2 {
        return Err(CoeffError::DimensionMismatch {
            message: format!("example 'infsin' needs dimension >= 2, got {dim}"),
        });
    }
    let last = dim - 1;
    let c = MatrixField::new(dim, move |x| {
        let v = stream_value(dim, x);
        let mut m = SquareMat::zeros(dim);
        m.set(0, last, v);
        m.set(last, 0, -v);
        m
    })
    .with_divergence(move |x| {
        let g = stream_grad(dim, x);
        let mut out = vec![0.0; dim];
        out[0] = g.value[last];
        out[last] = -g.value[0];
        FieldValue {
            value: out,
            singular: g.singular,
        }
    })
    .with_singular_set(Region::new(
        "the segments x1 = 0, 1, 2, ... within 1/4 of a bump center, where \
         the stream profile has infinite slope",
        |x: &[f64]| {
            let i = x[0].round();
            if i < 0.0 || x[0] != i {
                return false;
            }
            let r2: f64 = x[1..].iter().map(|v| v * v).sum();
            r2 < BUMP_RADIUS_SQ
        },
    ));
    CoefficientSet::new(
        "infsin",
        MatrixField::constant(dim, SquareMat::identity(dim)),
        c,
        VectorField::zero(dim),
        dim as f64 + 2.0,
    )
}

/// Manufactured benchmark with a closed-form answer. With `A = I`, `C = 0`,
/// and `H(x) = -x sin(||x||^2) / (4 + cos(||x||^2))`, the stationary flux of
/// `rho(x) = (4 + cos(||x||^2)) / 5` vanishes identically:
/// `(1/2) grad rho - rho H = 0`. Since `rho` is constant on every centered
/// circle, it also solves the unit-boundary problem on any centered disk up
/// to a constant factor. Returns the coefficients together with the exact
/// density normalized to 1 at the origin.
pub fn cosine_well(dim: usize) -> (CoefficientSet, ScalarField) {
    let h = VectorField::new(dim, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let f = r2.sin() / (4.0 + r2.cos());
        x.iter().map(|v| -v * f).collect()
    });
    let cs = CoefficientSet::new(
        "cosine-well",
        MatrixField::constant(dim, SquareMat::identity(dim)),
        MatrixField::constant(dim, SquareMat::zeros(dim)),
        h,
        dim as f64 + 2.0,
    )
    .expect("dimensions agree by construction");
    let rho = ScalarField::new(dim, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (4.0 + r2.cos()) / 5.0
    })
    .with_gradient(move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let f = -2.0 * r2.sin() / 5.0;
        x.iter().map(|v| v * f).collect()
    });
    (cs, rho)
}
