//! Binary PGM (P5) / PPM (P6) image output.
//!
//!`[H, W]` tensors become 8-bit grayscale PGM, `[H, W, 3]` tensors become
//! 8-bit RGB PPM. Values are clamped to `[0, 1]` and quantized with
//! half-up rounding to maxval 255. No compression, so outputs are
//! diffable byte-for-byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Serializes a `[H, W]` or `[H, W, 3]` tensor into PGM/PPM bytes.
pub fn encode_image(t: &Tensor) -> Result<Vec<u8>> {
    let (magic, h, w) = match t.shape() {
        [h, w] => ("P5", *h, *w),
        [h, w, 3] => ("P6", *h, *w),
        other => {
            return Err(Error::invalid(
                "image shape",
                format!("expected [H, W] or [H, W, 3], got {other:?}"),
            ))
        }
    };
    let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    bytes.extend(t.data().iter().map(|&v| quantize(v)));
    Ok(bytes)
}

pub fn write_image(path: &Path, t: &Tensor) -> Result<()> {
    super::write_atomic(path, &encode_image(t)?)
}
