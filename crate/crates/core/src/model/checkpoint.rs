//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "SEFN" | u32 version (=1) | u32 tensor count
//! per tensor:  u16 name length | UTF-8 name | u8 rank
//!              u32 extent per rank | f32 values, row-major
//! trailer:     u32 CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Values are stored as `f32` regardless of the in-memory element type, so
//! an `f32` model round-trips bit-exactly.

use super::config::FusionModelConfig;
use super::fusion::FusionModel;
use crate::tensor::Scalar;
use std::fmt;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SEFN";
const VERSION: u32 = 1;

/// Errors raised by checkpoint io; truncation, version and shape problems
/// are distinct variants.
#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    BadMagic,
    VersionMismatch { found: u32 },
    Truncated { reading: &'static str },
    CrcMismatch,
    InvalidName,
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    UnknownTensor { name: String },
    MissingTensor { name: String },
    Model(super::ModelError),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "checkpoint io error: {e}"),
            Self::BadMagic => write!(f, "not a checkpoint file (bad magic bytes)"),
            Self::VersionMismatch { found } => {
                write!(f, "unsupported checkpoint version {found}, expected {VERSION}")
            }
            Self::Truncated { reading } => write!(f, "checkpoint truncated while reading {reading}"),
            Self::CrcMismatch => write!(f, "checkpoint checksum mismatch"),
            Self::InvalidName => write!(f, "checkpoint contains a non-UTF-8 tensor name"),
            Self::ShapeMismatch { name, expected, found } => {
                write!(f, "tensor {name}: expected shape {expected:?}, file has {found:?}")
            }
            Self::UnknownTensor { name } => {
                write!(f, "tensor {name} in file does not exist in the configured model")
            }
            Self::MissingTensor { name } => write!(f, "tensor {name} missing from file"),
            Self::Model(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<std::io::Error> for CheckpointError {
    fn from(e: std::io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

impl From<super::ModelError> for CheckpointError {
    fn from(e: super::ModelError) -> Self {
        CheckpointError::Model(e)
    }
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

/// Serialize the model's full tensor state (parameters and buffers).
pub fn save_checkpoint<E: Scalar>(model: &FusionModel<E>, path: &Path) -> Result<()> {
    let tensors = model.named_tensors();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, tensor) in &tensors {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.push(tensor.rank() as u8);
        for &extent in tensor.shape() {
            buf.extend_from_slice(&(extent as u32).to_le_bytes());
        }
        for &v in tensor.read().iter() {
            buf.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, reading: &'static str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated { reading });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, reading: &'static str) -> Result<u16> {
        let b = self.take(2, reading)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, reading: &'static str) -> Result<u32> {
        let b = self.take(4, reading)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, reading: &'static str) -> Result<u8> {
        Ok(self.take(1, reading)?[0])
    }
}

/// Rebuild a model from `cfg` and fill every tensor from the file.
///
/// The file must contain exactly the tensors the configured model declares,
/// with matching shapes.
pub fn load_checkpoint<E: Scalar>(path: &Path, cfg: FusionModelConfig) -> Result<FusionModel<E>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() + 4 {
        return Err(CheckpointError::Truncated { reading: "header" });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes([trailer[0], trailer[1], trailer[2], trailer[3]]);
    if crc32fast::hash(body) != stored_crc {
        return Err(CheckpointError::CrcMismatch);
    }

    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let count = cur.u32("tensor count")? as usize;

    let model = FusionModel::<E>::build(cfg)?;
    let expected = model.named_tensors();
    let mut filled = vec![false; expected.len()];

    for _ in 0..count {
        let name_len = cur.u16("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| CheckpointError::InvalidName)?
            .to_string();
        let rank = cur.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32("extent")? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = cur.take(numel * 4, "values")?;

        let slot = expected.iter().position(|(n, _)| *n == name).ok_or_else(|| {
            CheckpointError::UnknownTensor { name: name.clone() }
        })?;
        let (_, tensor) = &expected[slot];
        if tensor.shape() != shape.as_slice() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: tensor.shape().to_vec(),
                found: shape,
            });
        }
        let values: Vec<E> = raw
            .chunks_exact(4)
            .map(|c| E::from_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        tensor.update_data(|d| d.copy_from_slice(&values));
        filled[slot] = true;
    }

    if let Some(idx) = filled.iter().position(|&f| !f) {
        return Err(CheckpointError::MissingTensor { name: expected[idx].0.clone() });
    }
    Ok(model)
}
