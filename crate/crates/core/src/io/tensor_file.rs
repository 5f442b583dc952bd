//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "NDTN"
//! version u32      currently 1
//! ndims   u32
//! dims    ndims × u64
//! payload product(dims) × f64 (row-major, IEEE-754 little-endian)
//! ```
//!
//! Round trips are bitwise exact. Reading validates magic, version and the
//! exact payload length; trailing bytes are rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"NDTN";
pub const VERSION: u32 = 1;

/// Serializes a tensor into the container layout.
pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut bytes =
        Vec::with_capacity(12 + 8 * t.shape().len() + 8 * t.len());
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        bytes.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Parses a tensor from container bytes.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
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
    let ndims = cursor.u32()? as usize;
    let mut shape = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        shape.push(cursor.u64()? as usize);
    }
    let count: usize = shape.iter().product();
    let expected_bytes = count as u64 * 8;
    let remaining = cursor.remaining() as u64;
    if remaining < expected_bytes {
        return Err(Error::TruncatedPayload {
            expected: expected_bytes,
            got: remaining,
        });
    }
    if remaining > expected_bytes {
        return Err(Error::invalid(
            "tensor file",
            format!("{} trailing bytes after payload", remaining - expected_bytes),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
    }
    Tensor::new(shape, data)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    super::write_atomic(path, &encode_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&std::fs::read(path)?)
}

/// Byte reader that reports truncation instead of panicking.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::TruncatedPayload {
                expected: n as u64,
                got: self.remaining() as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
