//! `DDWT` weight container.
//!
//! ```text
//! magic    "DDWT"
//! version  u32 LE (= 1)
//! count    u32 LE
//! count x {
//!     name_len u32 LE, name (UTF-8)
//!     dtype    u8 (0 = f32, 1 = f64)
//!     rank     u32 LE, rank x u64 LE dims
//!     data     little-endian elements, row-major
//! }
//! ```
//!
//! No padding or alignment anywhere.

use std::fs;
use std::path::Path;

use super::graph::{ModelGraph, ParamMap};
use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

pub const MAGIC: [u8; 4] = *b"DDWT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

/// A decoded tensor that may be either dtype.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl StoredTensor {
    pub fn dims(&self) -> &[usize] {
        match self {
            StoredTensor::F32(t) => t.dims(),
            StoredTensor::F64(t) => t.dims(),
        }
    }
}

/// Exact encoded size of a container holding `tensors`.
pub fn encoded_len<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a [usize], DType)>) -> usize {
    HEADER_LEN
        + tensors
            .into_iter()
            .map(|(name, dims, dtype)| {
                4 + name.len() + 1 + 4 + 8 * dims.len() + dtype.size_bytes() * dims.iter().product::<usize>()
            })
            .sum::<usize>()
}

/// Encodes f32 tensors in the given order.
pub fn encode<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor<f32>)>) -> Vec<u8> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut buf = Vec::with_capacity(encoded_len(
        tensors.iter().map(|(n, t)| (*n, t.dims(), DType::F32)),
    ));
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(DType::F32.code());
        buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.dims() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Decodes a container into `(name, tensor)` pairs in file order.
pub fn decode(bytes: &[u8]) -> Result<Vec<(String, StoredTensor)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = r.u32("tensor count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::data("weight container: tensor name is not UTF-8"))?
            .to_string();
        let code = r.take(1, "dtype")?[0];
        let dtype = DType::from_code(code).ok_or_else(|| Error::UnsupportedDtype {
            name: name.clone(),
            code,
        })?;
        let rank = r.u32("rank")? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::data(format!("weight container: tensor {name:?} has rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(usize::try_from(r.u64("dims")?).map_err(|_| Error::Truncated("dims"))?);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::Truncated("data"))?;
        let raw = r.take(
            n.checked_mul(dtype.size_bytes()).ok_or(Error::Truncated("data"))?,
            "data",
        )?;
        let tensor = match dtype {
            DType::F32 => StoredTensor::F32(Tensor::new(
                &dims,
                raw.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            )?),
            DType::F64 => StoredTensor::F64(Tensor::new(
                &dims,
                raw.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            )?),
        };
        out.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return Err(Error::data(format!(
            "weight container: {} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn model_to_bytes(model: &ModelGraph) -> Vec<u8> {
    encode(model.params().iter().map(|(k, t)| (k.as_str(), t)))
}

/// Loads parameters from container bytes. Names, order and dims must match
/// the model exactly; on any error the model is left untouched.
pub fn load_from_bytes(model: &mut ModelGraph, bytes: &[u8]) -> Result<()> {
    let stored = decode(bytes)?;
    if stored.len() != model.params().len() {
        return Err(Error::TensorCount {
            expected: model.params().len(),
            found: stored.len(),
        });
    }
    let mut params = ParamMap::with_capacity(stored.len());
    for ((expected, current), (name, tensor)) in model.params().iter().zip(stored) {
        if *expected != name {
            return Err(Error::NameMismatch {
                expected: expected.clone(),
                found: name,
            });
        }
        if current.dims() != tensor.dims() {
            return Err(Error::ShapeMismatch {
                name,
                expected: current.dims().to_vec(),
                found: tensor.dims().to_vec(),
            });
        }
        let t = match tensor {
            StoredTensor::F32(t) => t,
            StoredTensor::F64(_) => return Err(Error::UnsupportedDtype { name, code: 1 }),
        };
        params.insert(name, t);
    }
    model.replace_params(params)
}

pub fn save_weights(model: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_weights(model: &mut ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    load_from_bytes(model, &bytes)
}
