//! Synthetic image templates for toy datasets.
//!
//! Smooth blob templates serve as mixture centers (visually distinct,
//! values inside the pixel range); checkerboards provide structured
//! out-of-mixture probes.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// `count` smooth `[height, width]` templates, each a Gaussian bump with a
/// seeded position and radius, values in `(0.2, 0.8]`.
pub fn blob_templates(
    count: usize,
    height: usize,
    width: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Tensor>> {
    if count == 0 || height == 0 || width == 0 {
        return Err(Error::invalid(
            "blob_templates",
            "count, height and width must be positive",
        ));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let py = (0.15 + 0.7 * rng.next_uniform()) * (height.max(2) - 1) as f64;
        let px = (0.15 + 0.7 * rng.next_uniform()) * (width.max(2) - 1) as f64;
        let radius = (0.12 + 0.18 * rng.next_uniform()) * height.min(width) as f64;
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                let dy = i as f64 - py;
                let dx = j as f64 - px;
                let bump = (-(dy * dy + dx * dx) / (2.0 * radius * radius)).exp();
                data.push(0.2 + 0.6 * bump);
            }
        }
        out.push(Tensor::new(vec![height, width], data)?);
    }
    Ok(out)
}

/// `[height, width]` checkerboard alternating between `lo` and `hi` in
/// `tile`-sized squares.
pub fn checkerboard(height: usize, width: usize, tile: usize, lo: f64, hi: f64) -> Result<Tensor> {
    if height == 0 || width == 0 || tile == 0 {
        return Err(Error::invalid(
            "checkerboard",
            "height, width and tile must be positive",
        ));
    }
    let mut data = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let on = ((i / tile) + (j / tile)).is_multiple_of(2);
            data.push(if on { hi } else { lo });
        }
    }
    Tensor::new(vec![height, width], data)
}
