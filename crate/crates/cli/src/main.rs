//! `noisediff` — encode images into the noise space of a diffusion-style
//! model, interpolate latents, and run the statistical validation suites.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noisediff_core::error::Error as CoreError;
use noisediff_core::gmm::GaussianMixtureModel;
use noisediff_core::interp::{
    noise_diffusion_interpolate, noise_inject_interpolate, slerp, InterpolationPlan,
};
use noisediff_core::io::checkpoint::{read_checkpoint, write_checkpoint};
use noisediff_core::io::mixture_file::{load_mixture, write_mixture_spec, MixtureSpec};
use noisediff_core::io::pnm::write_image;
use noisediff_core::io::report::{report_to_json, write_report_csv, write_report_json};
use noisediff_core::io::tensor_file::{read_tensor, write_tensor};
use noisediff_core::ode::{decode, decode_from, encode, OdeConfig, ScoreBackend};
use noisediff_core::patterns::blob_templates;
use noisediff_core::rng::SeededRng;
use noisediff_core::scorenet::{train, ScoreNetParams, TrainConfig};
use noisediff_core::stats::{
    empirical_rule_check, mismatch_experiment, norm_concentration, orthogonality_stats,
    sphere_radius_diag, weighted_norm_ratio, StatReport,
};
use noisediff_core::tensor::Tensor;

mod config;
use config::{require_path, resolve_seed, FileConfig, ScheduleArgs};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "noisediff",
    about = "Latent-space interpolation laboratory over analytic and learned score models",
    version
)]
struct Cli {
    /// Flat JSON config file; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed governing all randomness (falls back to NOISEDIFF_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Slerp,
    NoiseInject,
    #[value(name = "noisediffusion")]
    NoiseDiffusion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    NormConcentration,
    Orthogonality,
    WeightedNorm,
    EmpiricalRule,
    Mismatch,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a toy mixture dataset: template centers, preview images,
    /// and a mixture description file
    GenDataset {
        /// Output directory (created if missing)
        #[arg(long)]
        out_dir: PathBuf,
        /// Number of mixture components
        #[arg(long, default_value_t = 4)]
        centers: usize,
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        height: usize,
        /// Per-component standard deviation around each center
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Fit the score network to samples of a mixture by denoising score
    /// matching and write a checkpoint
    TrainScore {
        /// Mixture description file providing the training distribution
        #[arg(long)]
        mixture: Option<PathBuf>,
        /// Checkpoint output path
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "train-steps", default_value_t = 4000)]
        train_steps: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Number of samples drawn from the mixture as the training set
        #[arg(long, default_value_t = 2048)]
        samples: usize,
        /// Smallest training noise level (default: schedule sigma_min)
        #[arg(long)]
        t_min: Option<f64>,
        /// Largest training noise level (default: schedule sigma_max)
        #[arg(long)]
        t_max: Option<f64>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Integrate an image up the noise schedule into a latent
    Encode {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mixture: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Integrate a latent back down to image space
    Decode {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start level (defaults to the schedule's sigma_max)
        #[arg(long)]
        from_sigma: Option<f64>,
        #[arg(long)]
        mixture: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write a PGM/PPM preview of the decoded tensor
        #[arg(long)]
        save_image: Option<PathBuf>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Interpolate two images through the noise space
    Interpolate {
        #[arg(long, value_enum, default_value_t = Method::NoiseDiffusion)]
        method: Method,
        #[arg(long)]
        input_a: Option<PathBuf>,
        #[arg(long)]
        input_b: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a PGM/PPM preview of the result
        #[arg(long)]
        save_image: Option<PathBuf>,
        /// Interpolation coefficient (0 = image A, 1 = image B)
        #[arg(long)]
        lambda: Option<f64>,
        /// Lubrication coefficient (weight of exogenous noise)
        #[arg(long)]
        gamma: Option<f64>,
        /// Compensation budget split between the two raw images
        #[arg(long)]
        c: Option<f64>,
        /// Clip boundary in units of the noise std ("inf" disables)
        #[arg(long)]
        k: Option<f64>,
        /// Noise level for --method noise-inject (default: sigma_max / 2)
        #[arg(long)]
        sigma: Option<f64>,
        /// Use one shared noise draw for both images (noise-inject)
        #[arg(long, default_value_t = false)]
        shared_noise: bool,
        #[arg(long)]
        mixture: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Run a statistical validation suite and emit its report
    Stats {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Dimension for the concentration/orthogonality/weighted-norm suites
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Blend coefficients for --suite weighted-norm
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Comma-separated injected-noise levels for --suite mismatch
        #[arg(long)]
        levels: Option<String>,
        /// Denoising level for --suite mismatch
        #[arg(long)]
        denoise_level: Option<f64>,
        /// Mixture file (required by --suite mismatch)
        #[arg(long)]
        mixture: Option<PathBuf>,
        /// Learned backend for --suite mismatch (defaults to the mixture)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Report the sphere-radius diagnostic of a latent tensor
    Diagnose {
        #[arg(long)]
        latent: PathBuf,
        /// Noise level the latent is supposed to sit at
        #[arg(long)]
        sigma: f64,
    },
}

enum Backend {
    Mixture(GaussianMixtureModel),
    Net(ScoreNetParams),
}

impl Backend {
    fn as_score(&self) -> &dyn ScoreBackend {
        match self {
            Backend::Mixture(m) => m,
            Backend::Net(n) => n,
        }
    }
}

fn load_backend(
    mixture: Option<&Path>,
    checkpoint: Option<&Path>,
    file: &FileConfig,
) -> Result<Backend, CliError> {
    let mixture = mixture.or(file.mixture.as_deref());
    let checkpoint = checkpoint.or(file.checkpoint.as_deref());
    match (mixture, checkpoint) {
        (Some(_), Some(_)) => Err(CliError::Validation(
            "backend: give either --mixture or --checkpoint, not both".into(),
        )),
        (Some(m), None) => Ok(Backend::Mixture(load_mixture(m)?)),
        (None, Some(c)) => Ok(Backend::Net(read_checkpoint(c)?)),
        (None, None) => Err(CliError::Validation(
            "backend: one of --mixture or --checkpoint is required".into(),
        )),
    }
}

fn parse_levels(levels: &str) -> Result<Vec<f64>, CliError> {
    levels
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                CliError::Validation(format!("levels: expected a number, got {s:?}"))
            })
        })
        .collect()
}

fn preview_image(path: &Path, t: &Tensor) -> Result<(), CliError> {
    // Previews clamp to the pixel range; the tensor file keeps raw values.
    let clamped = Tensor::new(
        t.shape().to_vec(),
        t.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )
    .map_err(CliError::from)?;
    write_image(path, &clamped).map_err(CliError::from)
}

fn emit_report(
    report: &StatReport,
    out_json: Option<&Path>,
    out_csv: Option<&Path>,
) -> Result<(), CliError> {
    print!("{}", report_to_json(report)?);
    if let Some(p) = out_json {
        write_report_json(p, report)?;
    }
    if let Some(p) = out_csv {
        write_report_csv(p, std::slice::from_ref(report))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &file)?;

    match cli.command {
        Command::GenDataset {
            out_dir,
            centers,
            width,
            height,
            delta,
        } => {
            if centers == 0 {
                return Err(CliError::Validation(
                    "centers: must be positive".into(),
                ));
            }
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::Validation(format!("out-dir: {e}")))?;
            let mut rng = SeededRng::new(seed);
            let templates = blob_templates(centers, height, width, &mut rng)?;
            let mut names = Vec::new();
            for (i, t) in templates.iter().enumerate() {
                let name = format!("center_{i:02}.ndtn");
                write_tensor(&out_dir.join(&name), t)?;
                preview_image(&out_dir.join(format!("center_{i:02}.pgm")), t)?;
                names.push(name);
            }
            let spec = MixtureSpec {
                weights: vec![1.0 / centers as f64; centers],
                delta,
                centers: names,
            };
            let spec_path = out_dir.join("mixture.json");
            write_mixture_spec(&spec_path, &spec)?;
            // Constructing the model validates the emitted spec end to end.
            load_mixture(&spec_path)?;
            println!(
                "wrote {} centers and mixture.json to {}",
                centers,
                out_dir.display()
            );
            Ok(())
        }

        Command::TrainScore {
            mixture,
            out,
            train_steps,
            batch,
            lr,
            samples,
            t_min,
            t_max,
            schedule,
        } => {
            let schedule = schedule.resolve(&file)?;
            let mixture_path = mixture
                .or(file.mixture.clone())
                .ok_or_else(|| CliError::Validation("mixture: required".into()))?;
            let model = load_mixture(&mixture_path)?;
            if samples == 0 {
                return Err(CliError::Validation("samples: must be positive".into()));
            }
            let root = SeededRng::new(seed);
            let mut data_rng = root.child(1);
            let dataset: Vec<Tensor> = (0..samples)
                .map(|_| model.sample(&mut data_rng))
                .collect::<Result<_, _>>()?;
            let config = TrainConfig {
                steps: train_steps,
                batch_size: batch,
                learning_rate: lr,
                t_min: t_min.unwrap_or(schedule.sigma_min),
                t_max: t_max.unwrap_or(schedule.sigma_max),
                seed: root.child(2).seed(),
            };
            if config.t_min < schedule.sigma_min || config.t_max > schedule.sigma_max {
                return Err(CliError::Validation(format!(
                    "t_min/t_max: [{}, {}] must lie within the schedule range [{}, {}]",
                    config.t_min, config.t_max, schedule.sigma_min, schedule.sigma_max
                )));
            }
            let params = train(&config, &dataset)?;
            write_checkpoint(&out, &params)?;
            println!(
                "trained {} steps on {} samples (dim {}), wrote {}",
                train_steps,
                samples,
                model.dim(),
                out.display()
            );
            Ok(())
        }

        Command::Encode {
            input,
            out,
            mixture,
            checkpoint,
            schedule,
        } => {
            let schedule = schedule.resolve(&file)?;
            let backend = load_backend(mixture.as_deref(), checkpoint.as_deref(), &file)?;
            let input = require_path(input, file.input.as_ref(), "input")?;
            let out = require_path(out, file.output.as_ref(), "out")?;
            let x0 = read_tensor(&input)?;
            let config = OdeConfig::new(schedule, backend.as_score());
            let latent = encode(&x0, &config)?;
            write_tensor(&out, &latent)?;
            println!("encoded {} -> {}", input.display(), out.display());
            Ok(())
        }

        Command::Decode {
            input,
            out,
            from_sigma,
            mixture,
            checkpoint,
            save_image,
            schedule,
        } => {
            let schedule = schedule.resolve(&file)?;
            let backend = load_backend(mixture.as_deref(), checkpoint.as_deref(), &file)?;
            let input = require_path(input, file.input.as_ref(), "input")?;
            let out = require_path(out, file.output.as_ref(), "out")?;
            let latent = read_tensor(&input)?;
            let config = OdeConfig::new(schedule, backend.as_score());
            let image = match from_sigma {
                Some(sigma) => decode_from(&latent, sigma, &config)?,
                None => decode(&latent, &config)?,
            };
            write_tensor(&out, &image)?;
            if let Some(p) = save_image {
                preview_image(&p, &image)?;
            }
            println!("decoded {} -> {}", input.display(), out.display());
            Ok(())
        }

        Command::Interpolate {
            method,
            input_a,
            input_b,
            out,
            save_image,
            lambda,
            gamma,
            c,
            k,
            sigma,
            shared_noise,
            mixture,
            checkpoint,
            schedule,
        } => {
            let schedule = schedule.resolve(&file)?;
            let backend = load_backend(mixture.as_deref(), checkpoint.as_deref(), &file)?;
            let input_a = require_path(input_a, file.input_a.as_ref(), "input-a")?;
            let input_b = require_path(input_b, file.input_b.as_ref(), "input-b")?;
            let out = require_path(out, file.output.as_ref(), "out")?;
            let x0 = read_tensor(&input_a)?;
            let x1 = read_tensor(&input_b)?;
            let lambda = lambda.or(file.lambda).unwrap_or(0.5);
            let config = OdeConfig::new(schedule.clone(), backend.as_score());
            let mut rng = SeededRng::new(seed);
            let result = match method {
                Method::Slerp => {
                    let la = encode(&x0, &config)?;
                    let lb = encode(&x1, &config)?;
                    decode(&slerp(&la, &lb, lambda)?, &config)?
                }
                Method::NoiseInject => {
                    let sigma = sigma.unwrap_or(schedule.sigma_max / 2.0);
                    noise_inject_interpolate(
                        &x0,
                        &x1,
                        lambda,
                        sigma,
                        shared_noise,
                        &mut rng,
                        &config,
                    )?
                }
                Method::NoiseDiffusion => {
                    let gamma = gamma.or(file.gamma).unwrap_or(0.1f64.sqrt());
                    let c = c.or(file.c).unwrap_or(2.0);
                    let k = k.or(file.k).unwrap_or(2.2);
                    let plan = InterpolationPlan::from_lambda(lambda, gamma, c, k)?;
                    noise_diffusion_interpolate(&x0, &x1, &plan, &mut rng, &config)?
                }
            };
            write_tensor(&out, &result)?;
            if let Some(p) = save_image {
                preview_image(&p, &result)?;
            }
            println!(
                "interpolated {} + {} -> {}",
                input_a.display(),
                input_b.display(),
                out.display()
            );
            Ok(())
        }

        Command::Stats {
            suite,
            n,
            trials,
            alpha,
            beta,
            gamma,
            levels,
            denoise_level,
            mixture,
            checkpoint,
            out_json,
            out_csv,
            schedule,
        } => {
            let mut rng = SeededRng::new(seed);
            let report = match suite {
                Suite::NormConcentration => norm_concentration(n, trials, &mut rng)?,
                Suite::Orthogonality => orthogonality_stats(n, trials, &mut rng)?,
                Suite::WeightedNorm => {
                    weighted_norm_ratio(alpha, beta, gamma, n, trials, &mut rng)?
                }
                Suite::EmpiricalRule => empirical_rule_check(trials, &mut rng)?,
                Suite::Mismatch => {
                    let schedule = schedule.resolve(&file)?;
                    let mixture_path = mixture
                        .or(file.mixture.clone())
                        .ok_or_else(|| {
                            CliError::Validation("mixture: required for --suite mismatch".into())
                        })?;
                    let model = load_mixture(&mixture_path)?;
                    let levels = parse_levels(&levels.ok_or_else(|| {
                        CliError::Validation("levels: required for --suite mismatch".into())
                    })?)?;
                    let denoise = denoise_level.ok_or_else(|| {
                        CliError::Validation("denoise-level: required for --suite mismatch".into())
                    })?;
                    let net = checkpoint
                        .or(file.checkpoint.clone())
                        .map(|p| read_checkpoint(&p))
                        .transpose()?;
                    let backend: &dyn ScoreBackend = match &net {
                        Some(n) => n,
                        None => &model,
                    };
                    let config = OdeConfig::new(schedule, backend);
                    mismatch_experiment(&model, &levels, denoise, &config, trials, &mut rng)?
                }
            };
            emit_report(&report, out_json.as_deref(), out_csv.as_deref())
        }

        Command::Diagnose { latent, sigma } => {
            let t = read_tensor(&latent)?;
            let ratio = sphere_radius_diag(&t, sigma)?;
            println!(
                "sphere_radius_diag: {ratio:.6} (n {}, norm {:.6}, sigma {sigma})",
                t.len(),
                t.norm()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Covers unknown flags and bad values: usage text, exit 1.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
