//! Weight bundle container: named tensors in a single binary file.
//!
//! Layout: 8-byte magic `HALOTNSR`, a little-endian u64 header length, a
//! UTF-8 JSON header mapping tensor name to `{dtype, shape, offset}`, then
//! raw little-endian row-major payloads. Offsets are relative to the start
//! of the payload section (the byte after the header). See FORMATS.md.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"HALOTNSR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F16,
    F32,
}

impl Dtype {
    fn byte_width(self) -> usize {
        match self {
            Dtype::F16 => 2,
            Dtype::F32 => 4,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Dtype::F16 => "f16",
            Dtype::F32 => "f32",
        }
    }
}

// dtype is kept as a string in the header so an unrecognized value can be
// reported against its tensor name instead of failing JSON deserialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

impl HeaderEntry {
    fn dtype(&self, name: &str) -> Result<Dtype> {
        match self.dtype.as_str() {
            "f16" => Ok(Dtype::F16),
            "f32" => Ok(Dtype::F32),
            other => Err(Error::UnsupportedDtype {
                name: name.to_string(),
                dtype: other.to_string(),
            }),
        }
    }
}

/// Read every tensor in a bundle, widening f16 payloads to f32.
///
/// Values are checked for NaN/Inf per tensor; the first offending tensor is
/// reported by name.
pub fn read_bundle(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }

    let mut len_bytes = [0u8; 8];
    reader
        .read_exact(&mut len_bytes)
        .map_err(|e| Error::io(path, e))?;
    let header_len = u64::from_le_bytes(len_bytes);

    let mut header_bytes = vec![0u8; header_len as usize];
    reader
        .read_exact(&mut header_bytes)
        .map_err(|e| Error::io(path, e))?;
    let header: BTreeMap<String, HeaderEntry> =
        serde_json::from_slice(&header_bytes).map_err(|e| Error::BadHeader {
            path: path.into(),
            reason: e.to_string(),
        })?;

    let payload_start = 16 + header_len;
    let mut tensors = BTreeMap::new();
    for (name, entry) in header {
        let dtype = entry.dtype(&name)?;
        let count: usize = entry.shape.iter().product();
        let byte_len = count * dtype.byte_width();
        reader
            .seek(SeekFrom::Start(payload_start + entry.offset))
            .map_err(|e| Error::io(path, e))?;
        let mut raw = vec![0u8; byte_len];
        reader.read_exact(&mut raw).map_err(|e| Error::io(path, e))?;

        let data: Vec<f32> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
            Dtype::F16 => raw
                .chunks_exact(2)
                .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f32())
                .collect(),
        };

        let tensor = Tensor::new(entry.shape, data);
        tensor.expect_finite(&name)?;
        tensors.insert(name, tensor);
    }
    Ok(tensors)
}

/// Write tensors to a bundle file in a canonical byte layout.
///
/// Entries are sorted by name and packed contiguously, so identical inputs
/// produce identical files.
pub fn write_bundle(path: &Path, tensors: &BTreeMap<String, (Dtype, &Tensor)>) -> Result<()> {
    let mut header = BTreeMap::new();
    let mut offset = 0u64;
    for (name, (dtype, tensor)) in tensors {
        header.insert(
            name.clone(),
            HeaderEntry {
                dtype: dtype.as_str().to_string(),
                shape: tensor.shape.clone(),
                offset,
            },
        );
        offset += (tensor.len() * dtype.byte_width()) as u64;
    }
    let header_bytes = serde_json::to_vec(&header).expect("header serialization");

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
    writer
        .write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(|e| Error::io(path, e))?;
    writer
        .write_all(&header_bytes)
        .map_err(|e| Error::io(path, e))?;
    for (dtype, tensor) in tensors.values() {
        match dtype {
            Dtype::F32 => {
                for v in &tensor.data {
                    writer
                        .write_all(&v.to_le_bytes())
                        .map_err(|e| Error::io(path, e))?;
                }
            }
            Dtype::F16 => {
                for v in &tensor.data {
                    writer
                        .write_all(&f16::from_f32(*v).to_le_bytes())
                        .map_err(|e| Error::io(path, e))?;
                }
            }
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Convenience for all-f32 bundles.
pub fn write_bundle_f32(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let entries: BTreeMap<String, (Dtype, &Tensor)> = tensors
        .iter()
        .map(|(k, v)| (k.clone(), (Dtype::F32, v)))
        .collect();
    write_bundle(path, &entries)
}
