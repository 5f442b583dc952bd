//! Empirical validation suites for high-dimensional Gaussian geometry.
//!
//! Each suite draws seeded samples, summarizes a statistic, and checks it
//! against declared finite-sample windows:
//!
//! * [`norm_concentration`] — `‖X‖` for `X ~ N(0, Iₙ)` concentrates at
//!   `√n` with O(1) spread, independent of `n`;
//! * [`orthogonality_stats`] — normalized inner products of independent
//!   draws scale like `1/√n` (near-orthogonality);
//! * [`weighted_norm_ratio`] — `‖αv₁+βv₂+γv₃‖ ≈ √(α²+β²+γ²)·√n` for
//!   independent standard Gaussian triples;
//! * [`empirical_rule_check`] — the 68–95–99.7 rule for `N(0,1)`;
//! * [`sphere_radius_diag`] — `‖latent‖/(σ√n)`, the on-sphere diagnostic
//!   for encoded latents (values near 1 mean the latent looks like
//!   `N(0, σ²Iₙ)`);
//! * [`mismatch_experiment`] — denoise noisy samples at a fixed level
//!   while the injected noise level varies, scoring mean squared error to
//!   the nearest mixture center.
//!
//! Reports are bit-reproducible from their seed: suites consume the
//! provided generator sequentially and record its seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GaussianMixtureModel;
use crate::ode::{decode_from, OdeConfig};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// One named window check inside a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn window(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        BoundCheck {
            name: name.to_string(),
            value,
            lo,
            hi,
            passed: value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Summary of one experiment: sample statistics, suite-specific metrics,
/// and pass/fail window checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatReport {
    pub experiment: String,
    pub samples: usize,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub quantiles: Quantiles,
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<BoundCheck>,
    pub passed: bool,
}

impl StatReport {
    /// Builds a report from raw statistic values (must be non-empty).
    pub fn from_values(
        experiment: &str,
        seed: u64,
        values: &[f64],
        metrics: Vec<(String, f64)>,
        checks: Vec<BoundCheck>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "report needs at least one sample"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
        let passed = checks.iter().all(|c| c.passed);
        Ok(StatReport {
            experiment: experiment.to_string(),
            samples: values.len(),
            seed,
            mean,
            std: var.sqrt(),
            quantiles: Quantiles {
                min: sorted[0],
                q25: q(0.25),
                median: q(0.5),
                q75: q(0.75),
                max: sorted[sorted.len() - 1],
            },
            metrics,
            checks,
            passed,
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

/// Distribution of `‖X‖ − √n` over `trials` draws of `X ~ N(0, Iₙ)`.
///
/// Declared windows: mean absolute deviation at most 1 and at least 99% of
/// trials within 5 (the norm's spread is ≈ 1/√2 whatever `n` is).
pub fn norm_concentration(n: usize, trials: usize, rng: &mut SeededRng) -> Result<StatReport> {
    if n < 1 {
        return Err(Error::invalid("n", "dimension must be at least 1"));
    }
    if trials < 100 {
        return Err(Error::invalid("trials", "need at least 100 trials"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut devs = Vec::with_capacity(trials);
    let mut norm_sum = 0.0;
    for _ in 0..trials {
        let x = rng.sample_standard(&[n])?;
        norm_sum += x.norm();
        devs.push(x.norm() - sqrt_n);
    }
    let mean_abs = devs.iter().map(|d| d.abs()).sum::<f64>() / trials as f64;
    let max_abs = devs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let frac_within_5 =
        devs.iter().filter(|d| d.abs() <= 5.0).count() as f64 / trials as f64;
    let checks = vec![
        BoundCheck::window("mean_abs_dev", mean_abs, 0.0, 1.0),
        BoundCheck::window("frac_within_5", frac_within_5, 0.99, 1.0),
    ];
    let metrics = vec![
        ("mean_abs_dev".into(), mean_abs),
        ("max_abs_dev".into(), max_abs),
        ("frac_within_5".into(), frac_within_5),
        ("mean_norm".into(), norm_sum / trials as f64),
    ];
    StatReport::from_values("norm-concentration", rng.seed(), &devs, metrics, checks)
}

/// Cosine of two tensors, exactly 1 for identical inputs (a unit cosine
/// flags a non-independent pair). Computed as
/// `⟨x,y⟩ / √(⟨x,x⟩·⟨y,y⟩)`.
pub fn cosine_alignment(x: &Tensor, y: &Tensor) -> Result<f64> {
    let num = x.dot(y)?;
    let den = (x.dot(x)? * y.dot(y)?).sqrt();
    if den == 0.0 {
        return Err(Error::invalid(
            "cosine input",
            "zero-norm tensor has no direction",
        ));
    }
    Ok(num / den)
}

/// Distribution of `√n·⟨X̄, Ȳ⟩` over independent Gaussian pairs. The
/// statistic is asymptotically standard normal, so its mean must sit in
/// ±0.1 and (for `n ≥ 100`) its variance in [0.8, 1.2]; the variance
/// window is skipped below `n = 100`, where the statistic is genuinely
/// wide.
pub fn orthogonality_stats(n: usize, trials: usize, rng: &mut SeededRng) -> Result<StatReport> {
    if n < 2 {
        return Err(Error::invalid("n", "dimension must be at least 2"));
    }
    if trials < 100 {
        return Err(Error::invalid("trials", "need at least 100 trials"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let x = rng.sample_standard(&[n])?;
        let y = rng.sample_standard(&[n])?;
        values.push(sqrt_n * cosine_alignment(&x, &y)?);
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / trials as f64;
    let mut checks = vec![BoundCheck::window("mean", mean, -0.1, 0.1)];
    let variance_checked = n >= 100;
    if variance_checked {
        checks.push(BoundCheck::window("variance", var, 0.8, 1.2));
    }
    let metrics = vec![
        ("variance".into(), var),
        ("variance_checked".into(), if variance_checked { 1.0 } else { 0.0 }),
    ];
    StatReport::from_values("orthogonality", rng.seed(), &values, metrics, checks)
}

/// Distribution of `‖αv₁+βv₂+γv₃‖ / (√(α²+β²+γ²)·√n)` over independent
/// standard Gaussian triples. The blend of independent Gaussians is again
/// Gaussian with summed variances, so the ratio concentrates at 1.
pub fn weighted_norm_ratio(
    alpha: f64,
    beta: f64,
    gamma: f64,
    n: usize,
    trials: usize,
    rng: &mut SeededRng,
) -> Result<StatReport> {
    let coeff_norm = (alpha * alpha + beta * beta + gamma * gamma).sqrt();
    if coeff_norm == 0.0 {
        return Err(Error::invalid(
            "coefficients",
            "at least one of alpha, beta, gamma must be nonzero",
        ));
    }
    if n < 100 {
        return Err(Error::invalid("n", "dimension must be at least 100"));
    }
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2 trials"));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let v1 = rng.sample_standard(&[n])?;
        let v2 = rng.sample_standard(&[n])?;
        let v3 = rng.sample_standard(&[n])?;
        let blend = crate::tensor::linear_combine(&[(alpha, &v1), (beta, &v2), (gamma, &v3)])?;
        values.push(blend.norm() / (coeff_norm * sqrt_n));
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    // Per-trial ratio spread is ~1/√(2n); the mean-window widens for small
    // n·trials and is the documented [0.99, 1.01] at n = 10^4.
    let half = (4.0 / (2.0 * n as f64 * trials as f64).sqrt()).max(0.01);
    let checks = vec![BoundCheck::window("mean_ratio", mean, 1.0 - half, 1.0 + half)];
    StatReport::from_values("weighted-norm", rng.seed(), &values, vec![], checks)
}

/// Fractions of `N(0,1)` samples within 1, 2 and 3 standard deviations,
/// checked against 0.6827, 0.9545 and 0.9973 (±0.002 each). Requires at
/// least 10^5 samples so the binomial error is well inside the windows.
pub fn empirical_rule_check(trials: usize, rng: &mut SeededRng) -> Result<StatReport> {
    if trials < 100_000 {
        return Err(Error::invalid("trials", "need at least 1e5 samples"));
    }
    let mut values = Vec::with_capacity(trials);
    let (mut in1, mut in2, mut in3) = (0usize, 0usize, 0usize);
    for _ in 0..trials {
        let v = rng.next_gaussian();
        let a = v.abs();
        if a <= 1.0 {
            in1 += 1;
        }
        if a <= 2.0 {
            in2 += 1;
        }
        if a <= 3.0 {
            in3 += 1;
        }
        values.push(v);
    }
    let f = |c: usize| c as f64 / trials as f64;
    let checks = vec![
        BoundCheck::window("frac_1sigma", f(in1), 0.6827 - 0.002, 0.6827 + 0.002),
        BoundCheck::window("frac_2sigma", f(in2), 0.9545 - 0.002, 0.9545 + 0.002),
        BoundCheck::window("frac_3sigma", f(in3), 0.9973 - 0.002, 0.9973 + 0.002),
    ];
    let metrics = vec![
        ("frac_1sigma".into(), f(in1)),
        ("frac_2sigma".into(), f(in2)),
        ("frac_3sigma".into(), f(in3)),
    ];
    StatReport::from_values("empirical-rule", rng.seed(), &values, metrics, checks)
}

/// `‖latent‖ / (σ·√n)`: near 1 when the latent is distributed like
/// `N(0, σ²Iₙ)`; far from 1 marks a latent the denoiser was never trained
/// to see.
pub fn sphere_radius_diag(latent: &Tensor, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(
            "sigma",
            format!("must be positive and finite, got {sigma}"),
        ));
    }
    Ok(latent.norm() / (sigma * (latent.len() as f64).sqrt()))
}

/// Noise-level mismatch experiment: draws `x₀` from the mixture, injects
/// `L·z` for each level `L`, denoises everything from `denoise_level`
/// through `config`, and reports per-level mean squared error (per
/// element) to the nearest mixture center.
///
/// Levels are the stds of the *injected* noise and may be 0 (decode an
/// unnoised sample); they must not exceed the schedule maximum. The
/// declared checks require the matched level to give the strictly smallest
/// mean error, with every under- and over-noised level worse.
pub fn mismatch_experiment(
    model: &GaussianMixtureModel,
    levels: &[f64],
    denoise_level: f64,
    config: &OdeConfig,
    trials: usize,
    rng: &mut SeededRng,
) -> Result<StatReport> {
    if levels.is_empty() {
        return Err(Error::invalid("levels", "need at least one noise level"));
    }
    for &l in levels {
        if !(l >= 0.0) || l > config.schedule.sigma_max {
            return Err(Error::invalid(
                "levels",
                format!(
                    "level {l} outside [0, {}]",
                    config.schedule.sigma_max
                ),
            ));
        }
    }
    if !config.schedule.contains(denoise_level) {
        return Err(Error::invalid(
            "denoise_level",
            format!(
                "level {denoise_level} outside schedule range [{}, {}]",
                config.schedule.sigma_min, config.schedule.sigma_max
            ),
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let n = model.dim() as f64;
    let mut all_mse = Vec::with_capacity(levels.len() * trials);
    let mut level_means = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut sum = 0.0;
        for _ in 0..trials {
            let x0 = model.sample(rng)?;
            let noisy = if level > 0.0 {
                x0.add(&rng.sample_gaussian(x0.shape(), level)?)?
            } else {
                x0
            };
            let out = decode_from(&noisy, denoise_level, config)?;
            let (_, sq) = model.nearest_center(&out)?;
            let mse = sq / n;
            sum += mse;
            all_mse.push(mse);
        }
        level_means.push(sum / trials as f64);
    }

    let matched = levels
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (*a - denoise_level)
                .abs()
                .partial_cmp(&(*b - denoise_level).abs())
                .expect("finite levels")
        })
        .map(|(i, _)| i)
        .expect("non-empty levels");
    let matched_mse = level_means[matched];
    let worst_under = (0..matched)
        .map(|i| level_means[i])
        .fold(f64::INFINITY, f64::min);
    let worst_over = ((matched + 1)..levels.len())
        .map(|i| level_means[i])
        .fold(f64::INFINITY, f64::min);

    let mut metrics = vec![("denoise_level".into(), denoise_level)];
    for (i, (&level, mean)) in levels.iter().zip(&level_means).enumerate() {
        metrics.push((format!("level{i}"), level));
        metrics.push((format!("mse{i}"), *mean));
    }
    let mut checks = Vec::new();
    if worst_under.is_finite() {
        checks.push(BoundCheck {
            name: "under_noise_worse".into(),
            value: worst_under - matched_mse,
            lo: 0.0,
            hi: f64::INFINITY,
            passed: worst_under > matched_mse,
        });
    }
    if worst_over.is_finite() {
        checks.push(BoundCheck {
            name: "over_noise_worse".into(),
            value: worst_over - matched_mse,
            lo: 0.0,
            hi: f64::INFINITY,
            passed: worst_over > matched_mse,
        });
    }
    let minimal = level_means
        .iter()
        .enumerate()
        .all(|(i, &m)| i == matched || m > matched_mse);
    checks.push(BoundCheck {
        name: "matched_minimal".into(),
        value: matched_mse,
        lo: 0.0,
        hi: f64::INFINITY,
        passed: minimal,
    });

    StatReport::from_values("mismatch", rng.seed(), &all_mse, metrics, checks)
}
