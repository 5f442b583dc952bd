//! Binary score-network checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "NDCK"
//! version  u32      currently 1
//! data_dim u32
//! hidden   u32      must equal the compiled hidden width
//! t_embed  u32      must equal the compiled embedding width
//! n_layers u32      always 6
//! layers   6 × (rows u32, cols u32, rows·cols × f64)
//! ```
//!
//! Layer order is fixed: `w1, b1, w2, b2, w3, b3`; biases store `cols = 1`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scorenet::{ScoreNetParams, HIDDEN, T_EMBED};

use super::tensor_file::Cursor;

pub const MAGIC: [u8; 4] = *b"NDCK";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ScoreNetParams) -> Vec<u8> {
    let layers = params.layers();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(params.data_dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(HIDDEN as u32).to_le_bytes());
    bytes.extend_from_slice(&(T_EMBED as u32).to_le_bytes());
    bytes.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for (rows, cols, values) in layers {
        bytes.extend_from_slice(&(rows as u32).to_le_bytes());
        bytes.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ScoreNetParams> {
    let mut cursor = Cursor::new(bytes);
    let magic = cursor.take(4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let data_dim = cursor.u32()? as usize;
    let hidden = cursor.u32()? as usize;
    let t_embed = cursor.u32()? as usize;
    if hidden != HIDDEN || t_embed != T_EMBED {
        return Err(Error::invalid(
            "checkpoint",
            format!(
                "architecture mismatch: file has hidden {hidden}, embed {t_embed}; \
                 this build uses {HIDDEN}, {T_EMBED}"
            ),
        ));
    }
    let n_layers = cursor.u32()? as usize;
    if n_layers != 6 {
        return Err(Error::invalid(
            "checkpoint",
            format!("expected 6 layers, found {n_layers}"),
        ));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = cursor.u32()? as usize;
        let cols = cursor.u32()? as usize;
        let count = rows * cols;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            values.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
        }
        layers.push(values);
    }
    if cursor.remaining() > 0 {
        return Err(Error::invalid(
            "checkpoint",
            format!("{} trailing bytes", cursor.remaining()),
        ));
    }
    ScoreNetParams::from_layers(data_dim, &layers)
}

pub fn write_checkpoint(path: &Path, params: &ScoreNetParams) -> Result<()> {
    super::write_atomic(path, &encode_checkpoint(params))
}

pub fn read_checkpoint(path: &Path) -> Result<ScoreNetParams> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn checkpoint_round_trips_exactly() {
        let params = ScoreNetParams::init(12, &mut SeededRng::new(8)).unwrap();
        let decoded = decode_checkpoint(&encode_checkpoint(&params)).unwrap();
        assert_eq!(decoded, params);
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let params = ScoreNetParams::init(4, &mut SeededRng::new(8)).unwrap();
        let bytes = encode_checkpoint(&params);
        let mut bad_magic = bytes.clone();
        bad_magic[1] = b'Z';
        assert!(matches!(
            decode_checkpoint(&bad_magic),
            Err(Error::BadMagic { .. })
        ));
        let mut truncated = bytes.clone();
        truncated.truncate(bytes.len() - 4);
        assert!(decode_checkpoint(&truncated).is_err());
        let mut wrong_hidden = bytes;
        wrong_hidden[12] = 3;
        assert!(decode_checkpoint(&wrong_hidden).is_err());
    }
}
