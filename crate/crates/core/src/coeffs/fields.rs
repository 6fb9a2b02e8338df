//! Field types: matrix-, vector-, and scalar-valued functions of position.
//!
//! Evaluation closures take a point slice of length `dim`. Gradients are
//! analytic when provided and fall back to central finite differences with a
//! step proportional to `1 + ||x||` otherwise; reports must surface which
//! method was in play, so the choice is exposed as [`GradMethod`].
//!
//! Fields with locally non-integrable derivatives carry a [`Region`]
//! describing the singular set. Evaluations inside it are flagged rather
//! than silently returned; non-finite values are always flagged.

use std::sync::Arc;

use crate::linalg::{norm2, SquareMat};

/// Relative step factor for finite-difference gradients:
/// `step = FD_STEP_FACTOR * (1 + ||x||)` per coordinate.
pub const FD_STEP_FACTOR: f64 = 1e-4;

/// A value together with a singularity flag. A flagged value may be huge or
/// infinite; callers decide whether the context tolerates it.
#[derive(Debug, Clone)]
pub struct FieldValue<T> {
    pub value: T,
    pub singular: bool,
}

impl<T> FieldValue<T> {
    pub fn regular(value: T) -> Self {
        FieldValue {
            value,
            singular: false,
        }
    }

    pub fn flagged(value: T) -> Self {
        FieldValue {
            value,
            singular: true,
        }
    }
}

/// Membership predicate for a singular set, with a human-readable name.
#[derive(Clone)]
pub struct Region {
    contains: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    pub description: String,
}

impl Region {
    pub fn new(
        description: impl Into<String>,
        contains: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Region {
            contains: Arc::new(contains),
            description: description.into(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.contains)(x)
    }
}

impl std::fmt::Debug for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Region({})", self.description)
    }
}

/// Which gradient a field reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMethod {
    Analytic,
    /// Central differences with step `FD_STEP_FACTOR * (1 + ||x||)`.
    FiniteDifference,
}

type MatEval = Arc<dyn Fn(&[f64]) -> SquareMat + Send + Sync>;
type VecEval = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type ScalarEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VecGradEval = Arc<dyn Fn(&[f64]) -> FieldValue<Vec<f64>> + Send + Sync>;

/// Matrix-valued coefficient field.
#[derive(Clone)]
pub struct MatrixField {
    dim: usize,
    eval: MatEval,
    /// Row divergence `div(M)_i = sum_j d_j m_ij`, analytic when available.
    div_eval: Option<VecGradEval>,
    /// Set where the divergence is singular (only meaningful with analytic
    /// divergence evaluators that flag their own outputs too).
    singular_set: Option<Region>,
    /// True when the field does not depend on position; lets hot loops cache.
    constant: bool,
}

impl MatrixField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> SquareMat + Send + Sync + 'static) -> Self {
        MatrixField {
            dim,
            eval: Arc::new(eval),
            div_eval: None,
            singular_set: None,
            constant: false,
        }
    }

    pub fn constant(dim: usize, m: SquareMat) -> Self {
        assert_eq!(m.dim(), dim);
        let zero = vec![0.0; dim];
        MatrixField {
            dim,
            eval: Arc::new(move |_| m.clone()),
            div_eval: Some(Arc::new(move |_| FieldValue::regular(zero.clone()))),
            singular_set: None,
            constant: true,
        }
    }

    pub fn with_divergence(
        mut self,
        div: impl Fn(&[f64]) -> FieldValue<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.div_eval = Some(Arc::new(div));
        self
    }

    pub fn with_singular_set(mut self, region: Region) -> Self {
        self.singular_set = Some(region);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn singular_set(&self) -> Option<&Region> {
        self.singular_set.as_ref()
    }

    pub fn grad_method(&self) -> GradMethod {
        if self.div_eval.is_some() {
            GradMethod::Analytic
        } else {
            GradMethod::FiniteDifference
        }
    }

    pub fn eval(&self, x: &[f64]) -> SquareMat {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    /// Row divergence at `x`, analytic or by central differences.
    pub fn divergence(&self, x: &[f64]) -> FieldValue<Vec<f64>> {
        if let Some(div) = &self.div_eval {
            let mut out = div(x);
            if let Some(region) = &self.singular_set {
                if region.contains(x) {
                    out.singular = true;
                }
            }
            if out.value.iter().any(|v| !v.is_finite()) {
                out.singular = true;
            }
            return out;
        }
        let d = self.dim;
        let step = FD_STEP_FACTOR * (1.0 + norm2(x));
        let mut out = vec![0.0; d];
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for j in 0..d {
            xp[j] = x[j] + step;
            xm[j] = x[j] - step;
            let mp = (self.eval)(&xp);
            let mm = (self.eval)(&xm);
            for (i, o) in out.iter_mut().enumerate() {
                *o += (mp.get(i, j) - mm.get(i, j)) / (2.0 * step);
            }
            xp[j] = x[j];
            xm[j] = x[j];
        }
        let singular = out.iter().any(|v| !v.is_finite())
            || self.singular_set.as_ref().is_some_and(|r| r.contains(x));
        FieldValue {
            value: out,
            singular,
        }
    }
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("dim", &self.dim)
            .field("grad_method", &self.grad_method())
            .field("constant", &self.constant)
            .finish()
    }
}

/// Vector-valued coefficient field (drifts).
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: VecEval,
    singular_set: Option<Region>,
}

impl VectorField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VectorField {
            dim,
            eval: Arc::new(eval),
            singular_set: None,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| vec![0.0; dim])
    }

    pub fn with_singular_set(mut self, region: Region) -> Self {
        self.singular_set = Some(region);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn singular_set(&self) -> Option<&Region> {
        self.singular_set.as_ref()
    }

    /// Evaluate with singularity flagging; never silently returns garbage.
    pub fn eval(&self, x: &[f64]) -> FieldValue<Vec<f64>> {
        debug_assert_eq!(x.len(), self.dim);
        let value = (self.eval)(x);
        let singular = value.iter().any(|v| !v.is_finite())
            || self.singular_set.as_ref().is_some_and(|r| r.contains(x));
        FieldValue { value, singular }
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field(
                "singular_set",
                &self.singular_set.as_ref().map(|r| &r.description),
            )
            .finish()
    }
}

/// Scalar field with an optional gradient (densities, test integrands).
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: ScalarEval,
    grad: Option<VecEval>,
    /// Radius of the disk on which the field is defined, when it is backed by
    /// a finite-element function rather than a formula.
    domain_radius: Option<f64>,
}

impl ScalarField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            eval: Arc::new(eval),
            grad: None,
            domain_radius: None,
        }
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_domain_radius(mut self, r: f64) -> Self {
        self.domain_radius = Some(r);
        self
    }

    pub fn one(dim: usize) -> Self {
        Self::new(dim, |_| 1.0).with_gradient(move |x| vec![0.0; x.len()])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_radius(&self) -> Option<f64> {
        self.domain_radius
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(x)
    }

    /// Gradient, when the field carries one.
    pub fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad.as_ref().map(|g| g(x))
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("has_gradient", &self.has_gradient())
            .field("domain_radius", &self.domain_radius)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled_identity_field(dim: usize) -> MatrixField {
        // A(x) = (1 + ||x||^2) I, divergence (div A)_i = 2 x_i.
        MatrixField::new(dim, move |x| {
            let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            SquareMat::identity(dim).scale(s)
        })
    }

    #[test]
    fn finite_difference_divergence_is_accurate_on_quadratic_entries() {
        let a = scaled_identity_field(2);
        assert_eq!(a.grad_method(), GradMethod::FiniteDifference);
        let x = [0.7, -0.3];
        let div = a.divergence(&x);
        assert!(!div.singular);
        // Central differences are exact on quadratics up to rounding.
        assert!((div.value[0] - 2.0 * x[0]).abs() < 1e-8);
        assert!((div.value[1] - 2.0 * x[1]).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_shows_second_order_decay_on_cubic_scale() {
        // Entries sqrt(1 + ||x||^2): third derivatives are nonzero, so the
        // central-difference error is visibly O(step^2). Compare util steps
        // explicitly by evaluating the error at two steps.
        let f = |x: &[f64], h: f64, j: usize| -> f64 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let s = |y: &[f64]| (1.0 + y.iter().map(|v| v * v).sum::<f64>()).sqrt();
            (s(&xp) - s(&xm)) / (2.0 * h)
        };
        let x = [1.0, 1.0];
        let exact = x[0] / (1.0 + 2.0_f64).sqrt();
        let h0 = 1e-2;
        let e1 = (f(&x, h0, 0) - exact).abs();
        let e2 = (f(&x, h0 / 2.0, 0) - exact).abs();
        assert!(
            e1 > 3.0 * e2,
            "halving the step should cut the error by ~4: {e1} -> {e2}"
        );
    }

    #[test]
    fn singular_region_flags_evaluations() {
        let v = VectorField::new(2, |x| vec![1.0 / x[0], 0.0]).with_singular_set(Region::new(
            "x1 = 0",
            |x: &[f64]| x[0] == 0.0,
        ));
        assert!(!v.eval(&[0.5, 0.0]).singular);
        let at_sing = v.eval(&[0.0, 0.0]);
        assert!(at_sing.singular);
    }

    #[test]
    fn non_finite_values_are_always_flagged() {
        let v = VectorField::new(2, |x| vec![1.0 / x[0], 0.0]);
        assert!(v.eval(&[0.0, 0.0]).singular, "infinite value must be flagged");
    }
}
