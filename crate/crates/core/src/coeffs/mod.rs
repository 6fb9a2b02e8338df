//! Coefficient triples `(A, C, H)` for second-order operators in divergence
//! form, and the drift fields derived from them.
//!
//! The operator acts on test functions as
//!
//! ```text
//! L f = (1/2) sum_ij d_i( (a_ij + c_ij) d_j f ) + sum_i h_i d_i f
//! ```
//!
//! with `A = (a_ij)` symmetric and locally elliptic, `C = (c_ij)`
//! antisymmetric, and `H = (h_i)` a (possibly locally unbounded) drift.
//! Rewriting into non-divergence form gives `L f = (1/2) trace(A D^2 f)
//! + <G, grad f>` with
//!
//! ```text
//! G = (1/2) div(A + C^T) + H,   div(M)_i = sum_j d_j m_ij.
//! ```
//!
//! Given a candidate density `rho`, the logarithmic derivative of `rho`
//! along a matrix field `M` is `beta^{rho,M} = (1/2)(div M + M grad rho / rho)`,
//! and the derived drifts of the associated process and co-process are
//! assembled from it; see [`derived_drifts`].

mod drifts;
mod fields;
mod registry;
mod validate;

pub use drifts::{derived_drifts, drift_g, log_derivative, DerivedDrifts};
pub use fields::{FieldValue, GradMethod, MatrixField, Region, ScalarField, VectorField};
pub use registry::{
    cosine_well, example, example_in_dim, example_names, from_template, ExampleInfo,
};
pub use validate::{validate_coefficients, ValidationGrid, ValidationReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("field evaluation produced a non-finite value at {point:?} in {what}")]
    NonFinite { point: Vec<f64>, what: String },
    #[error("point {point:?} lies in the singular set of {what}; pass allow_singular to proceed")]
    SingularPoint { point: Vec<f64>, what: String },
    #[error("density is not strictly positive at {point:?} (value {value:.6e})")]
    NonPositiveDensity { point: Vec<f64>, value: f64 },
    #[error("{what} requires a gradient but none is available")]
    MissingGradient { what: String },
    #[error("unknown example '{name}'; known examples: {known}")]
    UnknownExample { name: String, known: String },
    #[error("bad parameter '{name}': {message}")]
    BadParameter { name: String, message: String },
    #[error("dimension mismatch: {message}")]
    DimensionMismatch { message: String },
}

/// A coefficient triple with the integrability exponent of the drift.
///
/// Constructors guarantee the structural facts the pipeline relies on:
/// matching dimensions, `A` declared symmetric, `C` declared antisymmetric,
/// and `p > d` for the drift exponent.
#[derive(Debug)]
pub struct CoefficientSet {
    name: String,
    a: MatrixField,
    c: MatrixField,
    h: VectorField,
    p_exponent: f64,
}

impl CoefficientSet {
    pub fn new(
        name: impl Into<String>,
        a: MatrixField,
        c: MatrixField,
        h: VectorField,
        p_exponent: f64,
    ) -> Result<Self, CoeffError> {
        let d = a.dim();
        if c.dim() != d || h.dim() != d {
            return Err(CoeffError::DimensionMismatch {
                message: format!(
                    "A is {d}x{d} but C is {0}x{0} and H has dimension {1}",
                    c.dim(),
                    h.dim()
                ),
            });
        }
        if !(p_exponent > d as f64) {
            return Err(CoeffError::BadParameter {
                name: "p_exponent".to_string(),
                message: format!("integrability exponent must exceed the dimension {d}, got {p_exponent}"),
            });
        }
        Ok(CoefficientSet {
            name: name.into(),
            a,
            c,
            h,
            p_exponent,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn a(&self) -> &MatrixField {
        &self.a
    }

    pub fn c(&self) -> &MatrixField {
        &self.c
    }

    pub fn h(&self) -> &VectorField {
        &self.h
    }

    pub fn p_exponent(&self) -> f64 {
        self.p_exponent
    }

    /// Sobolev-type exponent `q = p d / (p + d)`; always in `(d/2, d)`.
    pub fn q_exponent(&self) -> f64 {
        let d = self.dim() as f64;
        let p = self.p_exponent;
        p * d / (p + d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_exponent_sits_between_half_d_and_d() {
        for name in example_names() {
            let cs = example(name).unwrap();
            let d = cs.dim() as f64;
            let q = cs.q_exponent();
            assert!(q > d / 2.0 && q < d, "{name}: q = {q} out of range");
            assert!(cs.p_exponent() > d);
        }
    }
}
