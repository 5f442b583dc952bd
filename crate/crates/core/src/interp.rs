//! Latent-space interpolation.
//!
//! Three methods over a shared encode/decode pipeline:
//!
//! * [`slerp`] — spherical linear interpolation of encoded latents;
//! * [`noise_inject_interpolate`] — add Gaussian noise to both images,
//!   slerp the noisy images, denoise (the edit-then-denoise recipe);
//! * [`noise_diffusion_interpolate`] — clip encoded latents, blend them
//!   with style coefficients (α, β), raw-image compensation (μ−α, ν−β) and
//!   lubrication noise (γ·ε), clip again, decode.
//!
//! The blend coefficients keep `α² + β² + γ² = 1` so the combined latent
//! stays on the radius-`σ√n` hypersphere where high-dimensional Gaussian
//! mass concentrates; the clip boundary suppresses entries that would sit
//! in the far tail of `N(0, σ²(t))`.

use crate::error::{Error, Result};
use crate::ode::{decode, decode_from, encode, OdeConfig};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

const PLAN_NORM_TOLERANCE: f64 = 1e-9;
const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

/// Coefficients of one latent blend.
///
/// `alpha`/`beta` weight the encoded latents of images 0 and 1 (style),
/// `mu_comp`/`nu_comp` weight the raw images injected to compensate for
/// information lost to clipping and noise, `gamma` weights exogenous
/// Gaussian noise, `clip_factor` scales the clip boundary in units of the
/// noise std, and `compensation_scale` is the budget split between
/// `mu_comp` and `nu_comp`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPlan {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu_comp: f64,
    pub nu_comp: f64,
    pub lambda: f64,
    pub clip_factor: f64,
    pub compensation_scale: f64,
}

impl InterpolationPlan {
    /// Validates the sphere constraint `α²+β²+γ² = 1` (within 1e-9),
    /// nonnegativity of the style/noise coefficients, `λ ∈ [0,1]` and
    /// positive `clip_factor` (infinity disables clipping).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        mu_comp: f64,
        nu_comp: f64,
        lambda: f64,
        clip_factor: f64,
        compensation_scale: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0) {
            return Err(Error::invalid(
                "plan",
                format!("alpha, beta, gamma must be nonnegative, got ({alpha}, {beta}, {gamma})"),
            ));
        }
        let norm_sq = alpha * alpha + beta * beta + gamma * gamma;
        if (norm_sq - 1.0).abs() > PLAN_NORM_TOLERANCE {
            return Err(Error::invalid(
                "plan",
                format!("alpha^2 + beta^2 + gamma^2 must be 1 within 1e-9, got {norm_sq}"),
            ));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(
                "lambda",
                format!("must lie in [0, 1], got {lambda}"),
            ));
        }
        if !(clip_factor > 0.0) {
            return Err(Error::invalid(
                "clip_factor",
                format!("must be positive (infinity disables clipping), got {clip_factor}"),
            ));
        }
        if !(compensation_scale > 0.0) || !compensation_scale.is_finite() {
            return Err(Error::invalid(
                "compensation_scale",
                format!("must be positive and finite, got {compensation_scale}"),
            ));
        }
        if !mu_comp.is_finite() || !nu_comp.is_finite() {
            return Err(Error::invalid(
                "plan",
                format!("compensation coefficients must be finite, got ({mu_comp}, {nu_comp})"),
            ));
        }
        Ok(InterpolationPlan {
            alpha,
            beta,
            gamma,
            mu_comp,
            nu_comp,
            lambda,
            clip_factor,
            compensation_scale,
        })
    }

    /// Standard plan builder:
    /// `α = cos(λπ/2)·√(1−γ²)` (style of image 0),
    /// `β = sin(λπ/2)·√(1−γ²)` (style of image 1),
    /// `μ = c·α/(α+β)`, `ν = c·β/(α+β)`.
    ///
    /// `λ = 0` keeps pure image-0 style. `γ = 1` is rejected: with no style
    /// weight left the compensation split is undefined.
    pub fn from_lambda(lambda: f64, gamma: f64, c: f64, k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(
                "lambda",
                format!("must lie in [0, 1], got {lambda}"),
            ));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(
                "gamma",
                format!("must lie in [0, 1), got {gamma}"),
            ));
        }
        let style = (1.0 - gamma * gamma).sqrt();
        // sin((1−λ)π/2) = cos(λπ/2); the sin form makes the λ ↦ 1−λ swap
        // produce bitwise-mirrored coefficients.
        let alpha = ((1.0 - lambda) * FRAC_PI_2).sin() * style;
        let beta = (lambda * FRAC_PI_2).sin() * style;
        let mu_comp = c * alpha / (alpha + beta);
        let nu_comp = c * beta / (alpha + beta);
        InterpolationPlan::new(alpha, beta, gamma, mu_comp, nu_comp, lambda, k, c)
    }

    /// Plan that reduces the blend to the orthogonal-angle slerp of the two
    /// latents: `γ = 0`, `μ = α = sin((1−λ)π/2)`, `ν = β = sin(λπ/2)`, no
    /// clipping. The compensation terms vanish exactly.
    pub fn orthogonal_slerp(lambda: f64) -> Result<Self> {
        let alpha = ((1.0 - lambda) * FRAC_PI_2).sin();
        let beta = (lambda * FRAC_PI_2).sin();
        InterpolationPlan::new(
            alpha,
            beta,
            0.0,
            alpha,
            beta,
            lambda,
            f64::INFINITY,
            alpha + beta,
        )
    }

    /// Plan that reduces the blend to shared-noise injection:
    /// `α = β = 0`, `γ = 1`, `μ = 1−λ`, `ν = λ`, no clipping. The blended
    /// latent becomes `(1−λ)·x₀⁽⁰⁾ + λ·x₀⁽¹⁾ + ε` exactly.
    pub fn shared_noise(lambda: f64) -> Result<Self> {
        InterpolationPlan::new(
            0.0,
            0.0,
            1.0,
            1.0 - lambda,
            lambda,
            lambda,
            f64::INFINITY,
            1.0,
        )
    }
}

/// Absolute clip boundary for latent entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSpec {
    bound: f64,
}

impl ClipSpec {
    /// `bound` must be positive; `f64::INFINITY` disables clipping.
    pub fn new(bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::invalid(
                "bound",
                format!("must be positive, got {bound}"),
            ));
        }
        Ok(ClipSpec { bound })
    }

    /// Boundary `k·sigma`, the clip factor in units of the noise std.
    pub fn from_factor(k: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(
                "sigma",
                format!("must be positive and finite, got {sigma}"),
            ));
        }
        ClipSpec::new(k * sigma)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_noop(&self) -> bool {
        self.bound.is_infinite()
    }
}

/// Elementwise clamp of `x` to `[−bound, +bound]`.
pub fn clip_latent(x: &Tensor, spec: &ClipSpec) -> Tensor {
    x.clamp_abs(spec.bound)
}

/// Spherical linear interpolation
/// `sin((1−λ)θ)/sin(θ) · x₀ + sin(λθ)/sin(θ) · x₁` with
/// `θ = arccos(⟨x₀,x₁⟩/(‖x₀‖‖x₁‖))`, the cosine clamped to `[−1, 1]`.
///
/// Zero-norm inputs are rejected. Within 1e-6 of `θ = 0` or `θ = π` the
/// spherical weights degenerate (`sin θ → 0`), so the function falls back
/// to linear interpolation.
pub fn slerp(x0: &Tensor, x1: &Tensor, lambda: f64) -> Result<Tensor> {
    let n0 = x0.norm();
    let n1 = x1.norm();
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::invalid(
            "slerp input",
            "zero-norm tensor has no direction to interpolate",
        ));
    }
    let cos_theta = (x0.dot(x1)? / (n0 * n1)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let degenerate = !(1e-6..=std::f64::consts::PI - 1e-6).contains(&theta);
    let (w0, w1) = if degenerate {
        (1.0 - lambda, lambda)
    } else {
        let sin_theta = theta.sin();
        (
            (((1.0 - lambda) * theta).sin()) / sin_theta,
            ((lambda * theta).sin()) / sin_theta,
        )
    };
    let mut data = Vec::with_capacity(x0.len());
    for (a, b) in x0.data().iter().zip(x1.data()) {
        data.push(w0 * a + w1 * b);
    }
    Tensor::new(x0.shape().to_vec(), data)
}

/// Blends clipped latents, raw images and exogenous noise:
///
/// ```text
/// clip( α·clip(l₀) + β·clip(l₁) + (μ−α)·x₀⁽⁰⁾ + (ν−β)·x₀⁽¹⁾ + γ·ε )
/// ```
///
/// with clip boundary `clip_factor · sigma_t`. The sum is grouped as
/// `(style + compensation) + noise`, each group a single pairwise add, so
/// swapping the two images together with `λ ↦ 1−λ` (which swaps α↔β and
/// μ↔ν) produces a bitwise-identical result for the same `ε`.
pub fn noise_diffusion_latent(
    latent0: &Tensor,
    latent1: &Tensor,
    x0: &Tensor,
    x1: &Tensor,
    eps: &Tensor,
    plan: &InterpolationPlan,
    sigma_t: f64,
) -> Result<Tensor> {
    let clip = ClipSpec::from_factor(plan.clip_factor, sigma_t)?;
    let l0 = clip_latent(latent0, &clip);
    let l1 = clip_latent(latent1, &clip);
    for t in [&l1, x0, x1, eps] {
        if !l0.same_shape(t) {
            return Err(Error::ShapeMismatch {
                left: l0.shape().to_vec(),
                right: t.shape().to_vec(),
            });
        }
    }
    let ca = plan.mu_comp - plan.alpha;
    let cb = plan.nu_comp - plan.beta;
    let mut data = Vec::with_capacity(l0.len());
    for i in 0..l0.len() {
        let style = plan.alpha * l0.data()[i] + plan.beta * l1.data()[i];
        let comp = ca * x0.data()[i] + cb * x1.data()[i];
        let noise = plan.gamma * eps.data()[i];
        data.push((style + comp) + noise);
    }
    let combined = Tensor::new(l0.shape().to_vec(), data)?;
    Ok(clip_latent(&combined, &clip))
}

/// Full noise-corrected interpolation: encode both images, blend with
/// [`noise_diffusion_latent`] (noise `ε ~ N(0, σ_max²·I)` drawn from `rng`),
/// decode the result.
pub fn noise_diffusion_interpolate(
    x0: &Tensor,
    x1: &Tensor,
    plan: &InterpolationPlan,
    rng: &mut SeededRng,
    config: &OdeConfig,
) -> Result<Tensor> {
    let sigma_t = config.schedule.sigma_max;
    let latent0 = encode(x0, config)?;
    let latent1 = encode(x1, config)?;
    let eps = rng.sample_gaussian(x0.shape(), sigma_t)?;
    let blended = noise_diffusion_latent(&latent0, &latent1, x0, x1, &eps, plan, sigma_t)?;
    decode(&blended, config)
}

/// Noisy-image interpolation before denoising: adds `N(0, σ²)` noise to
/// both images (one draw if `shared_noise`, two independent draws
/// otherwise) and slerps the noisy pair.
pub fn noise_inject_latent(
    x0: &Tensor,
    x1: &Tensor,
    lambda: f64,
    sigma: f64,
    shared_noise: bool,
    rng: &mut SeededRng,
) -> Result<Tensor> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(
            "sigma",
            format!("noise level must be positive and finite, got {sigma}"),
        ));
    }
    let eps0 = rng.sample_gaussian(x0.shape(), sigma)?;
    let eps1 = if shared_noise {
        eps0.clone()
    } else {
        rng.sample_gaussian(x1.shape(), sigma)?
    };
    slerp(&x0.add(&eps0)?, &x1.add(&eps1)?, lambda)
}

/// Edit-then-denoise interpolation: noise both images at level `sigma`
/// (which must lie inside the schedule), slerp, then decode from `sigma`.
/// Larger `sigma` trades faithfulness to the inputs for realism of the
/// output.
#[allow(clippy::too_many_arguments)]
pub fn noise_inject_interpolate(
    x0: &Tensor,
    x1: &Tensor,
    lambda: f64,
    sigma: f64,
    shared_noise: bool,
    rng: &mut SeededRng,
    config: &OdeConfig,
) -> Result<Tensor> {
    if !config.schedule.contains(sigma) {
        return Err(Error::invalid(
            "sigma",
            format!(
                "level {sigma} outside schedule range [{}, {}]",
                config.schedule.sigma_min, config.schedule.sigma_max
            ),
        ));
    }
    let noisy = noise_inject_latent(x0, x1, lambda, sigma, shared_noise, rng)?;
    decode_from(&noisy, sigma, config)
}
