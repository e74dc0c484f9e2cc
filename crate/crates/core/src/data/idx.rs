//! IDX image files (the MNIST container): big-endian header, unsigned-byte payload.

use std::path::Path;

use ndarray::Array2;

use super::{DatasetMeta, Source};
use crate::error::{Error, Result};

const IMAGES_U8: u32 = 0x0000_0803;
const LABELS_U8: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated(format!("IDX header ends at byte {}", bytes.len())))
}

/// Parses a 3-dimensional unsigned-byte IDX file into one flattened row per image,
/// pixels scaled to `[0, 1]`.
pub fn parse_idx(bytes: &[u8]) -> Result<Array2<f64>> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        IMAGES_U8 => {}
        LABELS_U8 => return Err(Error::IdxLabelFile),
        other => return Err(Error::BadMagic(other)),
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let dim = rows * cols;
    let payload = &bytes[16..];
    let needed = n * dim;
    if payload.len() < needed {
        return Err(Error::Truncated(format!("IDX payload has {} of {needed} bytes", payload.len())));
    }
    let values = payload[..needed].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Array2::from_shape_vec((n, dim), values).expect("length checked"))
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<(Array2<f64>, DatasetMeta)> {
    let data = parse_idx(&std::fs::read(path)?)?;
    let meta = DatasetMeta::new(&data, Source::Idx);
    Ok((data, meta))
}
