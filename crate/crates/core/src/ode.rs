//! Noise schedule and probability-flow ODE integration.
//!
//! The diffusion configuration used throughout has zero drift and marginal
//! noise standard deviation equal to the time variable, so the flow is
//! parameterized directly in sigma:
//!
//! ```text
//! dx/dσ = −σ · ∇log p_σ(x)
//! ```
//!
//! Integrating up the sigma grid encodes an image into the noise space;
//! integrating back down decodes. One second-order Heun step (Euler
//! predictor + trapezoidal corrector) is taken per grid interval. Both maps
//! are deterministic, so `decode(encode(x))` is a pure round trip.

use crate::error::{Error, Result};
use crate::gmm::GaussianMixtureModel;
use crate::tensor::Tensor;

/// A score function `∇log p_σ(x)` evaluated at arbitrary noise levels.
pub trait ScoreBackend {
    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor>;
}

impl ScoreBackend for GaussianMixtureModel {
    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        GaussianMixtureModel::score(self, x, sigma)
    }
}

impl<T: ScoreBackend + ?Sized> ScoreBackend for &T {
    fn score(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        (**self).score(x, sigma)
    }
}

/// Discretized noise-level grid from `sigma_max` down to `sigma_min` with
/// `n_steps` points and curvature `rho` (larger rho crowds points toward
/// the low-noise end).
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_steps: usize,
    pub rho: f64,
}

impl SigmaSchedule {
    pub fn new(sigma_min: f64, sigma_max: f64, n_steps: usize, rho: f64) -> Result<Self> {
        if !(sigma_min > 0.0) || !sigma_min.is_finite() {
            return Err(Error::invalid(
                "sigma_min",
                format!("must be positive and finite, got {sigma_min}"),
            ));
        }
        if !(sigma_max >= sigma_min) || !sigma_max.is_finite() {
            return Err(Error::invalid(
                "sigma_max",
                format!("must be finite and >= sigma_min, got {sigma_max}"),
            ));
        }
        if n_steps < 2 {
            return Err(Error::invalid(
                "n_steps",
                format!("need at least 2 grid points, got {n_steps}"),
            ));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(
                "rho",
                format!("must be positive and finite, got {rho}"),
            ));
        }
        Ok(SigmaSchedule {
            sigma_min,
            sigma_max,
            n_steps,
            rho,
        })
    }

    /// Defaults: sigma in [1e-3, 80], 64 steps, rho = 7.
    pub fn default_schedule() -> Self {
        SigmaSchedule::new(1e-3, 80.0, 64, 7.0).expect("defaults are valid")
    }

    /// Strictly decreasing grid
    /// `σᵢ = (σ_max^(1/ρ) + i/(N−1) · (σ_min^(1/ρ) − σ_max^(1/ρ)))^ρ`,
    /// with both endpoints exact. A degenerate schedule
    /// (`sigma_min == sigma_max`) yields a constant grid.
    pub fn karras_grid(&self) -> Vec<f64> {
        let n = self.n_steps;
        let inv_rho = 1.0 / self.rho;
        let hi = self.sigma_max.powf(inv_rho);
        let lo = self.sigma_min.powf(inv_rho);
        let mut grid: Vec<f64> = (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                (hi + f * (lo - hi)).powf(self.rho)
            })
            .collect();
        grid[0] = self.sigma_max;
        grid[n - 1] = self.sigma_min;
        grid
    }

    pub fn contains(&self, sigma: f64) -> bool {
        sigma >= self.sigma_min && sigma <= self.sigma_max
    }

    /// Same endpoints-at-`[sigma_min, sigma]` grid used for decoding from a
    /// mid-schedule noise level.
    fn truncated_at(&self, sigma: f64) -> Result<SigmaSchedule> {
        if !self.contains(sigma) {
            return Err(Error::invalid(
                "sigma",
                format!(
                    "level {sigma} outside schedule range [{}, {}]",
                    self.sigma_min, self.sigma_max
                ),
            ));
        }
        SigmaSchedule::new(self.sigma_min, sigma, self.n_steps, self.rho)
    }
}

/// Integrator configuration: the sigma grid plus the score backend that
/// defines the flow field. Encoding and decoding directions are the
/// `encode`/`decode` entry points.
pub struct OdeConfig<'a> {
    pub schedule: SigmaSchedule,
    pub backend: &'a dyn ScoreBackend,
}

impl<'a> OdeConfig<'a> {
    pub fn new(schedule: SigmaSchedule, backend: &'a dyn ScoreBackend) -> Self {
        OdeConfig { schedule, backend }
    }
}

/// One Heun step of `dx/dσ = −σ·score(x, σ)` from `sigma_from` to
/// `sigma_to`. If `sigma_to` is 0 the trapezoidal corrector is skipped
/// (the score is undefined there) and the Euler predictor is returned.
/// Non-finite intermediates are reported with the step endpoints.
pub fn heun_step(
    x: &Tensor,
    sigma_from: f64,
    sigma_to: f64,
    backend: &dyn ScoreBackend,
) -> Result<Tensor> {
    if sigma_from == sigma_to {
        return Err(Error::invalid(
            "sigma_to",
            format!("step endpoints must differ, both are {sigma_from}"),
        ));
    }
    if !(sigma_from >= 0.0) || !(sigma_to >= 0.0) {
        return Err(Error::invalid(
            "sigma",
            format!("step endpoints must be nonnegative, got {sigma_from} -> {sigma_to}"),
        ));
    }
    let step = || -> Result<Tensor> {
        let h = sigma_to - sigma_from;
        let d_from = backend.score(x, sigma_from)?.scale(-sigma_from)?;
        let predicted = x.add(&d_from.scale(h)?)?;
        if sigma_to == 0.0 {
            return Ok(predicted);
        }
        let d_to = backend.score(&predicted, sigma_to)?.scale(-sigma_to)?;
        let mut data = Vec::with_capacity(x.len());
        for ((xv, a), b) in x.data().iter().zip(d_from.data()).zip(d_to.data()) {
            data.push(xv + 0.5 * h * (a + b));
        }
        Tensor::new(x.shape().to_vec(), data)
    };
    step().map_err(|e| match e {
        Error::NonFinite { context } => Error::non_finite(format!(
            "heun step {sigma_from} -> {sigma_to} ({context})"
        )),
        other => other,
    })
}

fn integrate(x: &Tensor, grid: &[f64], config: &OdeConfig) -> Result<Tensor> {
    let mut state = x.clone();
    for pair in grid.windows(2) {
        // Zero-width intervals (degenerate schedules) are identity steps.
        if pair[0] == pair[1] {
            continue;
        }
        state = heun_step(&state, pair[0], pair[1], config.backend)?;
    }
    Ok(state)
}

/// Encodes an image into the noise space: integrates the flow from
/// `sigma_min` up to `sigma_max`.
pub fn encode(x0: &Tensor, config: &OdeConfig) -> Result<Tensor> {
    let mut grid = config.schedule.karras_grid();
    grid.reverse();
    integrate(x0, &grid, config)
}

/// Decodes a latent at `sigma_max` back to image space at `sigma_min`.
pub fn decode(latent: &Tensor, config: &OdeConfig) -> Result<Tensor> {
    let grid = config.schedule.karras_grid();
    integrate(latent, &grid, config)
}

/// Decodes a noisy tensor sitting at an intermediate level `sigma` down to
/// `sigma_min`, using a grid with the schedule's step count and curvature
/// over `[sigma_min, sigma]`. Errors if `sigma` is outside the schedule.
pub fn decode_from(x: &Tensor, sigma: f64, config: &OdeConfig) -> Result<Tensor> {
    let truncated = config.schedule.truncated_at(sigma)?;
    let grid = truncated.karras_grid();
    integrate(x, &grid, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GaussianMixtureModel;
    use crate::rng::SeededRng;
    use crate::tensor::rel_l2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    struct ZeroScore;
    impl ScoreBackend for ZeroScore {
        fn score(&self, x: &Tensor, _sigma: f64) -> Result<Tensor> {
            Tensor::zeros(x.shape())
        }
    }

    /// Closed-form flow for a single Gaussian centered at `m`: deviations
    /// from the center scale by √((δ²+σ_to²)/(δ²+σ_from²)).
    fn affine_flow(x: &Tensor, m: &Tensor, delta: f64, s_from: f64, s_to: f64) -> Tensor {
        let factor =
            ((delta * delta + s_to * s_to) / (delta * delta + s_from * s_from)).sqrt();
        let dev = x.sub(m).unwrap().scale(factor).unwrap();
        m.add(&dev).unwrap()
    }

    fn single(center: &[f64], delta: f64) -> GaussianMixtureModel {
        GaussianMixtureModel::single(Tensor::from_vec(center.to_vec()).unwrap(), delta).unwrap()
    }

    #[test]
    fn karras_grid_two_points_is_just_endpoints() {
        let s = SigmaSchedule::new(0.1, 5.0, 2, 7.0).unwrap();
        assert_eq!(s.karras_grid(), vec![5.0, 0.1]);
    }

    #[test]
    fn karras_grid_linear_case_by_hand() {
        let s = SigmaSchedule::new(1.0, 9.0, 3, 1.0).unwrap();
        let g = s.karras_grid();
        assert_relative_eq!(g[0], 9.0);
        assert_relative_eq!(g[1], 5.0, max_relative = 1e-12);
        assert_relative_eq!(g[2], 1.0);
    }

    #[test]
    fn schedule_rejects_single_point() {
        assert!(SigmaSchedule::new(0.1, 5.0, 1, 7.0).is_err());
    }

    #[test]
    fn heun_step_with_zero_field_is_identity() {
        let x = Tensor::from_vec(vec![1.0, -2.0, 3.0]).unwrap();
        let y = heun_step(&x, 2.0, 1.0, &ZeroScore).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn heun_step_rejects_equal_endpoints() {
        let x = Tensor::from_vec(vec![1.0]).unwrap();
        assert!(heun_step(&x, 1.0, 1.0, &ZeroScore).is_err());
    }

    #[test]
    fn heun_step_reports_step_endpoints_on_overflow() {
        struct Exploding;
        impl ScoreBackend for Exploding {
            fn score(&self, x: &Tensor, _sigma: f64) -> Result<Tensor> {
                x.scale(1e308)
            }
        }
        let x = Tensor::from_vec(vec![1e8, -1e8]).unwrap();
        let err = heun_step(&x, 2.0, 1.0, &Exploding).unwrap_err();
        assert!(err.is_numerical());
        let msg = err.to_string();
        assert!(msg.contains("heun step 2 -> 1"), "{msg}");
    }

    #[test]
    fn heun_step_is_locally_third_order_on_the_affine_flow() {
        // Local error should shrink ~8x when the step is halved; an
        // observed order ≥ 2.7 confirms the trapezoidal corrector.
        let delta = 0.5;
        let model = single(&[0.3, -0.2, 0.8, 0.1], delta);
        let x = Tensor::from_vec(vec![1.4, 0.9, -0.7, 0.2]).unwrap();
        let m = model.centers()[0].clone();
        let err = |dsigma: f64| {
            let to = 2.0 - dsigma;
            let got = heun_step(&x, 2.0, to, &model).unwrap();
            let exact = affine_flow(&x, &m, delta, 2.0, to);
            got.sub(&exact).unwrap().norm()
        };
        let e1 = err(0.2);
        let e2 = err(0.1);
        let order = (e1 / e2).log2();
        assert!(order >= 2.7, "observed order {order} (errors {e1}, {e2})");
    }

    #[test]
    fn heun_step_is_linear_for_centered_gaussian() {
        let model = single(&[0.0, 0.0, 0.0], 0.3);
        let x = Tensor::from_vec(vec![0.5, -1.0, 2.0]).unwrap();
        let c = 3.7;
        let a = heun_step(&x.scale(c).unwrap(), 1.5, 1.0, &model).unwrap();
        let b = heun_step(&x, 1.5, 1.0, &model).unwrap().scale(c).unwrap();
        assert!(rel_l2(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn encode_matches_closed_form_map() {
        let delta = 0.5;
        let model = single(&[0.6, 0.2, 0.4, 0.8, 0.5, 0.1, 0.9, 0.3], delta);
        let schedule = SigmaSchedule::new(0.05, 5.0, 64, 7.0).unwrap();
        let config = OdeConfig::new(schedule.clone(), &model);
        let mut rng = SeededRng::new(31);
        let x0 = model.sample(&mut rng).unwrap();
        let latent = encode(&x0, &config).unwrap();
        let exact = affine_flow(
            &x0,
            &model.centers()[0],
            delta,
            schedule.sigma_min,
            schedule.sigma_max,
        );
        let rel = rel_l2(&latent, &exact).unwrap();
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn degenerate_schedule_is_identity() {
        let model = single(&[0.5, 0.5], 0.1);
        let schedule = SigmaSchedule::new(1.0, 1.0, 8, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let x = Tensor::from_vec(vec![0.7, -0.1]).unwrap();
        assert_eq!(encode(&x, &config).unwrap(), x);
        assert_eq!(decode(&x, &config).unwrap(), x);
    }

    #[test]
    fn encode_preserves_pairwise_separation_per_closed_form_jacobian() {
        // For a single Gaussian the encode map is affine with scalar
        // stretch √((δ²+T²)/(δ²+σ_min²)); pairwise distances must scale by
        // that factor within integrator error.
        let delta = 0.05;
        let model = single(&[0.5; 16], delta);
        let schedule = SigmaSchedule::new(1e-3, 80.0, 64, 7.0).unwrap();
        let factor = ((delta * delta + 80.0 * 80.0)
            / (delta * delta + 1e-3 * 1e-3))
            .sqrt();
        let config = OdeConfig::new(schedule, &model);
        let mut rng = SeededRng::new(90);
        let points: Vec<Tensor> = (0..6)
            .map(|_| model.sample(&mut rng).unwrap())
            .collect();
        let latents: Vec<Tensor> = points
            .iter()
            .map(|p| encode(p, &config).unwrap())
            .collect();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let d0 = points[i].sub(&points[j]).unwrap().norm();
                let d1 = latents[i].sub(&latents[j]).unwrap().norm();
                let ratio = d1 / (factor * d0);
                assert!(
                    (0.99..=1.01).contains(&ratio),
                    "pair ({i},{j}): ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn roundtrip_recovers_input_on_mixture_backend() {
        let n = 16usize;
        let c0 = Tensor::new(vec![n], vec![0.25; n]).unwrap();
        let c1 = Tensor::new(vec![n], vec![0.75; n]).unwrap();
        let model = GaussianMixtureModel::new(vec![0.5, 0.5], vec![c0, c1], 0.05).unwrap();
        let schedule = SigmaSchedule::new(1e-3, 80.0, 64, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let mut rng = SeededRng::new(12);
        for _ in 0..4 {
            let x0 = model.sample(&mut rng).unwrap();
            let back = decode(&encode(&x0, &config).unwrap(), &config).unwrap();
            let rel = rel_l2(&back, &x0).unwrap();
            assert!(rel <= 1e-2, "round-trip relative error {rel}");
        }
    }

    #[test]
    fn decoding_the_center_is_a_fixed_point() {
        let model = single(&[0.4, 0.4, 0.4], 0.08);
        let schedule = SigmaSchedule::new(1e-3, 80.0, 32, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let m = model.centers()[0].clone();
        let out = decode(&m, &config).unwrap();
        assert!(rel_l2(&out, &m).unwrap() < 1e-12);
    }

    #[test]
    fn decoding_prior_samples_reproduces_data_moments() {
        // Closed-form shrink map: out = m + (x_T − m)·δ'/√(δ²+T²) with
        // δ' = √(δ²+σ_min²), so decoded prior samples have mean ≈ m and
        // per-coordinate std ≈ δ'.
        let delta = 0.05;
        let n = 64usize;
        let t_max = 80.0;
        let model = single(&vec![0.5; n], delta);
        let schedule = SigmaSchedule::new(1e-3, t_max, 64, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let mut rng = SeededRng::new(2024);
        let trials = 256usize;
        let mut sum = vec![0.0; n];
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let latent = rng.sample_gaussian(&[n], t_max).unwrap();
            let out = decode(&latent, &config).unwrap();
            for (s, v) in sum.iter_mut().zip(out.data()) {
                *s += v;
            }
            for v in out.data() {
                sum_sq += (v - 0.5) * (v - 0.5);
            }
        }
        let mean_vec = Tensor::new(
            vec![n],
            sum.iter().map(|s| s / trials as f64).collect(),
        )
        .unwrap();
        let mean_err = rel_l2(&mean_vec, &model.centers()[0]).unwrap();
        assert!(mean_err <= 0.05, "mean deviation {mean_err}");
        let pooled_std = (sum_sq / (trials * n) as f64).sqrt();
        assert!(
            (pooled_std - delta).abs() <= 0.05 * delta,
            "pooled std {pooled_std} vs delta {delta}"
        );
    }

    #[test]
    fn doubling_steps_cuts_roundtrip_error_by_at_least_3_5x() {
        let n = 8usize;
        let c0 = Tensor::new(vec![n], vec![0.3; n]).unwrap();
        let c1 = Tensor::new(vec![n], vec![0.7; n]).unwrap();
        let model = GaussianMixtureModel::new(vec![0.5, 0.5], vec![c0, c1], 0.05).unwrap();
        let mut rng = SeededRng::new(8);
        let x0 = model.sample(&mut rng).unwrap();
        let err_at = |steps: usize| {
            let schedule = SigmaSchedule::new(1e-3, 80.0, steps, 7.0).unwrap();
            let config = OdeConfig::new(schedule, &model);
            let back = decode(&encode(&x0, &config).unwrap(), &config).unwrap();
            rel_l2(&back, &x0).unwrap()
        };
        let e32 = err_at(32);
        let e64 = err_at(64);
        assert!(
            e32 / e64 >= 3.5,
            "error ratio {} (e32 {e32}, e64 {e64})",
            e32 / e64
        );
    }

    #[test]
    fn in_distribution_latents_land_near_the_hypersphere() {
        let n = 1024usize;
        let delta = 0.05;
        let t_max = 80.0;
        let model = single(&vec![0.5; n], delta);
        let schedule = SigmaSchedule::new(1e-3, t_max, 64, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let mut rng = SeededRng::new(61);
        for _ in 0..3 {
            let x0 = model.sample(&mut rng).unwrap();
            let latent = encode(&x0, &config).unwrap();
            let ratio = latent.norm() / (t_max * (n as f64).sqrt());
            assert!(
                (0.9..=1.1).contains(&ratio),
                "latent radius ratio {ratio}"
            );
        }
    }

    #[test]
    fn decode_from_requires_in_range_sigma() {
        let model = single(&[0.5], 0.1);
        let schedule = SigmaSchedule::new(1e-3, 2.0, 16, 7.0).unwrap();
        let config = OdeConfig::new(schedule, &model);
        let x = Tensor::from_vec(vec![0.5]).unwrap();
        assert!(decode_from(&x, 3.0, &config).is_err());
        assert!(decode_from(&x, 1.0, &config).is_ok());
    }

    proptest! {
        #[test]
        fn karras_grid_is_strictly_decreasing(
            lo in 1e-4f64..0.5,
            span in 0.5f64..100.0,
            n in 2usize..40,
            rho in 0.5f64..10.0
        ) {
            let s = SigmaSchedule::new(lo, lo + span, n, rho).unwrap();
            let g = s.karras_grid();
            prop_assert_eq!(g[0], s.sigma_max);
            prop_assert_eq!(g[n - 1], s.sigma_min);
            for w in g.windows(2) {
                prop_assert!(w[0] > w[1], "grid not strictly decreasing: {:?}", g);
            }
        }
    }
}
