//! IVT1 tensor files.
//!
//! Layout: magic `IVT1`, `u32` rank, `rank × u64` dims, then row-major
//! `f64` values. All integers and floats little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Tensor;

pub const MAGIC: &[u8; 4] = b"IVT1";

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.shape().len() + 8 * t.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take(bytes: &[u8], at: usize, len: usize) -> Result<&[u8]> {
    let end = at.checked_add(len).ok_or(Error::DimensionOverflow)?;
    bytes.get(at..end).ok_or(Error::Truncated { needed: end, found: bytes.len() })
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let magic = take(bytes, 0, 4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic { offset: 0 });
    }
    let ndim = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().expect("4 bytes")) as usize;
    let dims_len = ndim.checked_mul(8).ok_or(Error::DimensionOverflow)?;
    let dim_bytes = take(bytes, 8, dims_len)?;
    let mut shape = Vec::with_capacity(ndim);
    let mut count: usize = 1;
    for chunk in dim_bytes.chunks_exact(8) {
        let d = u64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        let d = usize::try_from(d).map_err(|_| Error::DimensionOverflow)?;
        count = count.checked_mul(d).ok_or(Error::DimensionOverflow)?;
        shape.push(d);
    }
    let payload_len = count.checked_mul(8).ok_or(Error::DimensionOverflow)?;
    let start = 8 + dims_len;
    let payload = take(bytes, start, payload_len)?;
    if bytes.len() > start + payload_len {
        return Err(Error::Shape(format!(
            "{} trailing bytes after the tensor payload",
            bytes.len() - start - payload_len
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::new(shape, data)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    fs::write(path, encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&fs::read(path)?)
}
