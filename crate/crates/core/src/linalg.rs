//! Small dense matrices of runtime dimension.
//!
//! Coefficient fields evaluate to `d x d` matrices where `d` is fixed per run
//! but only known at runtime. A flat row-major buffer avoids pulling a full
//! linear-algebra type into every public signature; the handful of operations
//! the pipeline needs (matvec, transpose-matvec, Cholesky) live here.

use thiserror::Error;

/// Row-major square matrix of runtime dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMat {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum FactorError {
    /// The leading `minor x minor` block failed to be positive definite.
    #[error("Cholesky factorisation failed: leading minor {minor} has non-positive pivot {pivot:.6e}")]
    NonPositivePivot { minor: usize, pivot: f64 },
    #[error("Cholesky factorisation hit a non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
}

impl SquareMat {
    pub fn zeros(dim: usize) -> Self {
        SquareMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// Build from a row-major buffer; `data.len()` must equal `dim * dim`.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "buffer length must be dim^2");
        SquareMat { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> SquareMat {
        let d = self.dim;
        let mut t = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                t.data[j * d + i] = self.data[i * d + j];
            }
        }
        t
    }

    /// `self + other`, entrywise.
    pub fn add(&self, other: &SquareMat) -> SquareMat {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        SquareMat {
            dim: self.dim,
            data,
        }
    }

    /// `self - other`, entrywise.
    pub fn sub(&self, other: &SquareMat) -> SquareMat {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        SquareMat {
            dim: self.dim,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> SquareMat {
        SquareMat {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Matrix-vector product `self * x` written into `out`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d);
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut acc = 0.0;
            for j in 0..d {
                acc += row[j] * x[j];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// Quadratic form `x^T self x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut ri = 0.0;
            for j in 0..d {
                ri += row[j] * x[j];
            }
            acc += x[i] * ri;
        }
        acc
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute asymmetry `max_ij |m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Maximum absolute violation of `m_ij = -m_ji` (diagonal included).
    pub fn antisymmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix:
/// returns `L` with `L L^T = a`. Fails naming the first leading minor whose
/// pivot is not strictly positive.
pub fn cholesky_lower(a: &SquareMat) -> Result<SquareMat, FactorError> {
    let d = a.dim();
    let mut l = SquareMat::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            if !a.get(i, j).is_finite() {
                return Err(FactorError::NonFinite { row: i, col: j });
            }
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(FactorError::NonPositivePivot {
                        minor: i + 1,
                        pivot: sum,
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// `l * l^T` for a lower-triangular factor; used to check reconstruction.
pub fn lower_times_transpose(l: &SquareMat) -> SquareMat {
    let d = l.dim();
    let mut out = SquareMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..=i.min(j) {
                acc += l.get(i, k) * l.get(j, k);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// Euclidean norm of a slice.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dot product of two slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
