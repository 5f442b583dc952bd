//! Dense row-major `f64` tensors and the small set of arithmetic operations
//! the samplers and interpolators are built on.
//!
//! Shapes never broadcast: mixing two tensors requires identical shapes and
//! anything else is a hard error. Every public operation returns tensors
//! whose entries are finite; NaN or infinity anywhere is reported as
//! [`Error::NonFinite`].

use crate::error::{Error, Result};

/// Dense multi-dimensional array of 64-bit reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, validating that `data` has exactly
    /// `shape.iter().product()` finite entries and all dimensions are positive.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid("shape", "must have at least one dimension"));
        }
        if let Some(&bad) = shape.iter().find(|&&d| d == 0) {
            return Err(Error::invalid(
                "shape",
                format!("dimension sizes must be positive, got {bad}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::invalid(
                "data",
                format!(
                    "length {} does not match shape {:?} (needs {})",
                    data.len(),
                    shape,
                    expected
                ),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite("tensor construction"));
        }
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![0.0; len])
    }

    /// 1-D tensor from a flat vector.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Tensor::new(vec![len], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// Inner product `Σᵢ aᵢbᵢ`. Errors on shape mismatch, naming both shapes.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum();
        if !s.is_finite() {
            return Err(Error::non_finite("dot product"));
        }
        Ok(s)
    }

    /// Euclidean norm `√(Σᵢ aᵢ²)`; 0 for the zero tensor.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Tensor::new(self.shape.clone(), data)
    }

    /// Elementwise difference.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Tensor::new(self.shape.clone(), data)
    }

    /// Elementwise scaling by `c`.
    pub fn scale(&self, c: f64) -> Result<Tensor> {
        let data = self.data.iter().map(|v| c * v).collect();
        Tensor::new(self.shape.clone(), data)
    }

    /// Elementwise clamp of magnitudes to `bound`; an infinite bound is a
    /// no-op. Never increases any `|entry|`.
    pub fn clamp_abs(&self, bound: f64) -> Tensor {
        if bound.is_infinite() {
            return self.clone();
        }
        let data = self.data.iter().map(|v| v.clamp(-bound, bound)).collect();
        Tensor {
            shape: self.shape.clone(),
            data,
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Elementwise `Σ cᵢ·Tᵢ` over a non-empty list of (coefficient, tensor)
/// terms sharing one shape. Accumulates left to right.
pub fn linear_combine(terms: &[(f64, &Tensor)]) -> Result<Tensor> {
    let (first_c, first_t) = terms.first().ok_or(Error::EmptyCombination)?;
    let mut acc: Vec<f64> = first_t.data.iter().map(|v| first_c * v).collect();
    for (c, t) in &terms[1..] {
        first_t.check_same_shape(t)?;
        for (a, v) in acc.iter_mut().zip(&t.data) {
            *a += c * v;
        }
    }
    Tensor::new(first_t.shape.clone(), acc)
}

/// Relative L2 distance `‖a − b‖ / ‖b‖` (absolute distance if `b` is zero).
/// Convenience for tests and diagnostics.
pub fn rel_l2(a: &Tensor, b: &Tensor) -> Result<f64> {
    let diff = a.sub(b)?.norm();
    let denom = b.norm();
    Ok(if denom == 0.0 { diff } else { diff / denom })
}
