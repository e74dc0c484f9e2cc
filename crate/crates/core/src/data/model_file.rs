//! Model file: a text header followed by raw little-endian atoms and a checksum.
//!
//! ```text
//! DRON-MODEL\n
//! <TOML header: format_version, dim, depth, atoms_per_layer, payload_values, [config]>
//! END-HEADER\n
//! f64 LE atoms, layer-major, atom-major, coordinate-minor
//! u64 LE FNV-1a checksum of the atom bytes
//! ```
//!
//! An optional `created` header field is accepted on read; it is not covered by the
//! checksum and is never written, so identical models produce identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Atom, DeepModel, Dictionary, TrainConfig};

pub const MAGIC: &str = "DRON-MODEL\n";
pub const FORMAT_VERSION: u32 = 1;
const END_HEADER: &str = "END-HEADER\n";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dim: usize,
    depth: usize,
    atoms_per_layer: Vec<usize>,
    payload_values: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created: Option<String>,
    config: TrainConfig,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn write_model(model: &DeepModel) -> Result<Vec<u8>> {
    let atoms_per_layer: Vec<usize> = model.layers().iter().map(Dictionary::len).collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        dim: model.dim(),
        depth: model.depth(),
        payload_values: atoms_per_layer.iter().sum::<usize>() * model.dim(),
        atoms_per_layer,
        created: None,
        config: model.config.clone(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Header(e.to_string()))?;
    let mut payload = Vec::with_capacity(header.payload_values * 8);
    for layer in model.layers() {
        for atom in layer.atoms() {
            for v in atom.values() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut out = Vec::with_capacity(MAGIC.len() + text.len() + payload.len() + 32);
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(text.as_bytes());
    if !text.ends_with('\n') {
        out.push(b'\n');
    }
    out.extend_from_slice(END_HEADER.as_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a(&payload).to_le_bytes());
    Ok(out)
}

pub fn read_model(bytes: &[u8]) -> Result<DeepModel> {
    let rest = bytes.strip_prefix(MAGIC.as_bytes()).ok_or_else(|| Error::Header("missing DRON-MODEL magic line".into()))?;
    let marker = format!("\n{END_HEADER}");
    let split = rest
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| Error::Truncated("model header has no END-HEADER line".into()))?;
    let text = std::str::from_utf8(&rest[..split + 1]).map_err(|e| Error::Header(e.to_string()))?;
    let body = &rest[split + marker.len()..];

    #[derive(Deserialize)]
    struct Version {
        format_version: u32,
    }
    let version: Version = toml::from_str(text).map_err(|e| Error::Header(e.to_string()))?;
    if version.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version.format_version, expected: FORMAT_VERSION });
    }
    let header: Header = toml::from_str(text).map_err(|e| Error::Header(e.to_string()))?;
    if header.depth == 0 || header.atoms_per_layer.len() != header.depth {
        return Err(Error::Header(format!(
            "depth {} does not match {} layer widths",
            header.depth,
            header.atoms_per_layer.len()
        )));
    }
    let expected_values = header.atoms_per_layer.iter().sum::<usize>() * header.dim;
    if header.dim == 0 || expected_values != header.payload_values {
        return Err(Error::Header(format!(
            "payload_values {} inconsistent with dim {} and widths {:?}",
            header.payload_values, header.dim, header.atoms_per_layer
        )));
    }
    let payload_len = expected_values * 8;
    if body.len() < payload_len + 8 {
        return Err(Error::Truncated(format!("model payload has {} of {} bytes", body.len(), payload_len + 8)));
    }
    if body.len() > payload_len + 8 {
        return Err(Error::Header(format!("{} unexpected trailing bytes", body.len() - payload_len - 8)));
    }
    let (payload, tail) = body.split_at(payload_len);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = fnv1a(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut layers = Vec::with_capacity(header.depth);
    for &k in &header.atoms_per_layer {
        let atoms = (0..k)
            .map(|_| Atom::new(values.by_ref().take(header.dim).collect()))
            .collect::<Result<Vec<_>>>()?;
        layers.push(Dictionary::new(atoms)?);
    }
    DeepModel::new(layers, header.config)
}

pub fn save_model(model: &DeepModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DeepModel> {
    read_model(&std::fs::read(path)?)
}
