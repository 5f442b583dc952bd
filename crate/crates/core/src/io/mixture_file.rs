//! JSON mixture descriptions.
//!
//! ```json
//! {
//!   "weights": [0.5, 0.5],
//!   "delta": 0.05,
//!   "centers": ["center_00.ndtn", "center_01.ndtn"]
//! }
//! ```
//!
//! Center entries are tensor-file paths resolved relative to the JSON
//! file's directory (absolute paths pass through unchanged).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gmm::GaussianMixtureModel;
use crate::tensor::Tensor;

use super::tensor_file;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub delta: f64,
    pub centers: Vec<String>,
}

pub fn write_mixture_spec(path: &Path, spec: &MixtureSpec) -> Result<()> {
    let mut json = serde_json::to_string_pretty(spec)?;
    json.push('\n');
    super::write_atomic(path, json.as_bytes())
}

pub fn read_mixture_spec(path: &Path) -> Result<MixtureSpec> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Reads a spec and its referenced center tensors into a validated model.
pub fn load_mixture(path: &Path) -> Result<GaussianMixtureModel> {
    let spec = read_mixture_spec(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let centers: Result<Vec<Tensor>> = spec
        .centers
        .iter()
        .map(|c| {
            let p = Path::new(c);
            let resolved = if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            };
            tensor_file::read_tensor(&resolved)
        })
        .collect();
    GaussianMixtureModel::new(spec.weights, centers?, spec.delta)
}
