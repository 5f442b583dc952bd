//! File formats: binary tensors, network checkpoints, PGM/PPM images,
//! mixture descriptions, and report serialization.
//!
//! All writers go through [`write_atomic`]: bytes land in a sibling
//! temporary file that is renamed over the target on success, so a failed
//! run never leaves a partial output behind.

use std::path::Path;

use crate::error::Result;

pub mod checkpoint;
pub mod mixture_file;
pub mod pnm;
pub mod report;
pub mod tensor_file;

/// Writes `bytes` to `path` via a temporary sibling file plus rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
