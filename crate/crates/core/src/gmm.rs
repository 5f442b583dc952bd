//! Closed-form densities and scores for Gaussian-mixture data
//! distributions.
//!
//! A mixture with weights `w_k`, centers `c_k` and per-component covariance
//! `δ²I` plays the role of the data distribution. Convolving it with
//! `N(0, t²I)` keeps it a mixture with covariance `(δ² + t²)I`, so the noisy
//! marginal at every level `t` — and therefore its score `∇log p_t(x)` — is
//! available in closed form. That makes the mixture the reference backend
//! against which the whole ODE pipeline can be verified exactly.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Mixture of isotropic Gaussians: `Σ_k w_k · N(c_k, δ²I)`.
#[derive(Debug, Clone)]
pub struct GaussianMixtureModel {
    weights: Vec<f64>,
    centers: Vec<Tensor>,
    base_std: f64,
}

/// Per-component posterior probabilities at a given point and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(Vec<f64>);

impl Responsibilities {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl GaussianMixtureModel {
    /// Validates and builds a mixture. Weights must be positive and sum to 1
    /// within 1e-12; centers must share one shape; `base_std` must be
    /// positive.
    pub fn new(weights: Vec<f64>, centers: Vec<Tensor>, base_std: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != centers.len() {
            return Err(Error::invalid(
                "weights",
                format!(
                    "need one positive weight per center, got {} weights for {} centers",
                    weights.len(),
                    centers.len()
                ),
            ));
        }
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(
                "weights",
                format!("must be positive and finite, got {w}"),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "weights",
                format!("must sum to 1 within 1e-12, got {total}"),
            ));
        }
        let first_shape = centers[0].shape().to_vec();
        for c in &centers[1..] {
            if c.shape() != first_shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    left: first_shape,
                    right: c.shape().to_vec(),
                });
            }
        }
        if !(base_std > 0.0) || !base_std.is_finite() {
            return Err(Error::invalid(
                "base_std",
                format!("must be positive and finite, got {base_std}"),
            ));
        }
        Ok(GaussianMixtureModel {
            weights,
            centers,
            base_std,
        })
    }

    /// Single-Gaussian convenience constructor.
    pub fn single(center: Tensor, base_std: f64) -> Result<Self> {
        GaussianMixtureModel::new(vec![1.0], vec![center], base_std)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[Tensor] {
        &self.centers
    }

    pub fn base_std(&self) -> f64 {
        self.base_std
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.centers[0].shape()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn check_input(&self, x: &Tensor, t: f64) -> Result<f64> {
        if x.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                left: x.shape().to_vec(),
                right: self.shape().to_vec(),
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(
                "t",
                format!("noise level must be finite and >= 0, got {t}"),
            ));
        }
        // Marginal per-coordinate variance after convolving with N(0, t²I).
        Ok(self.base_std * self.base_std + t * t)
    }

    /// `log w_k + log N(x; c_k, (δ²+t²)I)` for every component.
    fn component_log_terms(&self, x: &Tensor, variance: f64) -> Vec<f64> {
        let n = self.dim() as f64;
        let log_norm = -0.5 * n * (std::f64::consts::TAU * variance).ln();
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| {
                let sq: f64 = x
                    .data()
                    .iter()
                    .zip(c.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                w.ln() + log_norm - sq / (2.0 * variance)
            })
            .collect()
    }

    /// Log density of the noisy marginal `p_t = p_data ⊗ N(0, t²I)`,
    /// computed with log-sum-exp so it stays finite at image dimensions.
    pub fn log_density(&self, x: &Tensor, t: f64) -> Result<f64> {
        let variance = self.check_input(x, t)?;
        let terms = self.component_log_terms(x, variance);
        Ok(log_sum_exp(&terms))
    }

    /// Posterior component probabilities (softmax of the per-component log
    /// terms); always sums to 1.
    pub fn responsibilities(&self, x: &Tensor, t: f64) -> Result<Responsibilities> {
        let variance = self.check_input(x, t)?;
        let terms = self.component_log_terms(x, variance);
        let lse = log_sum_exp(&terms);
        Ok(Responsibilities(
            terms.iter().map(|l| (l - lse).exp()).collect(),
        ))
    }

    /// Score of the noisy marginal:
    /// `∇log p_t(x) = Σ_k r_k(x,t) · (c_k − x) / (δ² + t²)`.
    pub fn score(&self, x: &Tensor, t: f64) -> Result<Tensor> {
        let variance = self.check_input(x, t)?;
        let r = self.responsibilities(x, t)?;
        // Σ r_k c_k first, then one pass for (mean_center − x)/variance.
        let mut blended = vec![0.0; x.len()];
        for (rk, c) in r.0.iter().zip(&self.centers) {
            for (b, v) in blended.iter_mut().zip(c.data()) {
                *b += rk * v;
            }
        }
        let data = blended
            .iter()
            .zip(x.data())
            .map(|(b, xv)| (b - xv) / variance)
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    /// Draws `x₀ ~ mixture`: picks a component by weight, then adds
    /// `N(0, δ²I)` around its center.
    pub fn sample(&self, rng: &mut SeededRng) -> Result<Tensor> {
        let u = rng.next_uniform();
        let mut acc = 0.0;
        let mut idx = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u <= acc {
                idx = k;
                break;
            }
        }
        let noise = rng.sample_gaussian(self.shape(), self.base_std)?;
        self.centers[idx].add(&noise)
    }

    /// Index and squared L2 distance of the center nearest to `x`.
    pub fn nearest_center(&self, x: &Tensor) -> Result<(usize, f64)> {
        if x.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                left: x.shape().to_vec(),
                right: self.shape().to_vec(),
            });
        }
        let mut best = (0usize, f64::INFINITY);
        for (k, c) in self.centers.iter().enumerate() {
            let sq: f64 = x
                .data()
                .iter()
                .zip(c.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if sq < best.1 {
                best = (k, sq);
            }
        }
        Ok(best)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}
