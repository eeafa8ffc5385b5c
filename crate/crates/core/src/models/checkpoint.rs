//! Binary checkpoint container.
//!
//! ```text
//! "TFDM" | u32 version | [u8; 32] config digest | u64 len | config TOML
//! | u64 seed | u32 count | count × record | [u8; 32] sha256 of all preceding bytes
//! record = u16 name len | name | u8 dtype | u8 ndims | ndims × u64 | data
//! ```
//!
//! All integers and tensor data are little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CheckpointError, Error, Result};
use crate::models::config::NetworkConfig;
use crate::models::network::{build_network, Network};
use crate::scalar::{DType, Scalar};

pub const MAGIC: &[u8; 4] = b"TFDM";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T> NamedTensor<T> {
    pub fn flat(name: impl Into<String>, data: Vec<T>) -> Self {
        Self {
            name: name.into(),
            dims: vec![data.len()],
            data,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub config: NetworkConfig,
    pub seed: u64,
    pub tensors: Vec<NamedTensor<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.digest());
        let text = self.config.to_toml_string();
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(T::DTYPE.code());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                v.write_le(&mut out);
            }
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < 4 + 4 + 32 + 32 {
            return Err(CheckpointError::Checksum);
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(CheckpointError::Checksum);
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: VERSION,
            });
        }
        let digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let len = r.u64()? as usize;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Malformed("config is not UTF-8".into()))?;
        let config =
            NetworkConfig::from_toml_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        if config.digest() != digest {
            return Err(CheckpointError::Malformed("config digest does not match config text".into()));
        }
        let seed = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let n = r.u16()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            let code = r.u8()?;
            let dtype = DType::from_code(code)
                .ok_or_else(|| CheckpointError::Malformed(format!("unknown dtype code {code}")))?;
            if dtype != T::DTYPE {
                return Err(CheckpointError::DType {
                    found: dtype.name(),
                    expected: T::DTYPE.name(),
                });
            }
            let ndims = r.u8()? as usize;
            let mut dims = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                dims.push(r.u64()? as usize);
            }
            let numel = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| CheckpointError::Malformed(format!("`{name}`: dims overflow")))?;
            let size = dtype.size();
            let raw = r.take(numel.checked_mul(size).ok_or_else(|| CheckpointError::Malformed("size overflow".into()))?)?;
            let data = raw.chunks_exact(size).map(T::read_le).collect();
            tensors.push(NamedTensor { name, dims, data });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Malformed(format!(
                "{} trailing bytes after the last record",
                body.len() - r.pos
            )));
        }
        Ok(Self { config, seed, tensors })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CheckpointError::Malformed("record runs past end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Write the network's parameters and buffers, followed by `extra`
/// tensors (typically optimizer state).
pub fn save_checkpoint<T: Scalar>(path: &Path, net: &mut Network<T>, extra: &[NamedTensor<T>]) -> Result<()> {
    let mut tensors = net.state_tensors();
    tensors.extend_from_slice(extra);
    let ckpt = Checkpoint {
        config: net.config().clone(),
        seed: net.seed(),
        tensors,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Checkpoint::from_bytes(&bytes)?)
}

/// Rebuild the network stored at `path`. Tensors that are not network
/// state are returned unchanged.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Network<T>, Vec<NamedTensor<T>>)> {
    let ckpt = read_checkpoint::<T>(path)?;
    let mut net = build_network::<T>(&ckpt.config, ckpt.seed)?;
    net.load_state(&ckpt.tensors)?;
    let own: Vec<String> = net.state_tensors().into_iter().map(|t| t.name).collect();
    let extra = ckpt.tensors.into_iter().filter(|t| !own.contains(&t.name)).collect();
    Ok((net, extra))
}

/// Like [`load_checkpoint`], but rejects a checkpoint whose config differs
/// from `expected`.
pub fn load_checkpoint_as<T: Scalar>(
    path: &Path,
    expected: &NetworkConfig,
) -> Result<(Network<T>, Vec<NamedTensor<T>>)> {
    let ckpt = read_checkpoint::<T>(path)?;
    if ckpt.config.digest() != expected.digest() {
        return Err(CheckpointError::ConfigMismatch {
            found: ckpt.config.name,
            expected: expected.name.clone(),
        }
        .into());
    }
    load_checkpoint(path)
}
