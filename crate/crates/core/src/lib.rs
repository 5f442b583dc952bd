//! Latent-space interpolation laboratory for diffusion-style generative
//! models.
//!
//! The crate provides:
//!
//! * dense `f64` tensors with a seeded, bit-reproducible Gaussian sampler
//!   ([`tensor`], [`rng`]);
//! * closed-form scores of Gaussian-mixture data distributions and a small
//!   trainable score network fit by denoising score matching ([`gmm`],
//!   [`scorenet`]);
//! * a probability-flow ODE integrator (Heun, Karras sigma grid) with
//!   encode/decode maps between image space and the noise space ([`ode`]);
//! * spherical linear, noise-injection, and noise-corrected latent
//!   interpolation with boundary control ([`interp`]);
//! * empirical validation suites for high-dimensional Gaussian geometry
//!   ([`stats`]);
//! * binary tensor/checkpoint files, PGM/PPM image output, and mixture
//!   descriptions ([`io`]).

// Validation deliberately uses `!(x > 0.0)`-style comparisons: unlike the
// direct opposite, they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gmm;
pub mod interp;
pub mod io;
pub mod ode;
pub mod patterns;
pub mod rng;
pub mod scorenet;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use gmm::{GaussianMixtureModel, Responsibilities};
pub use interp::{ClipSpec, InterpolationPlan};
pub use ode::{OdeConfig, ScoreBackend, SigmaSchedule};
pub use rng::SeededRng;
pub use scorenet::{ScoreNetParams, TrainConfig};
pub use stats::StatReport;
pub use tensor::{linear_combine, Tensor};
