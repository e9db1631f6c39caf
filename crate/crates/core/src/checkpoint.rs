//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "SWANCKPT"
//! version    u32       1
//! header_len u64
//! header     JSON      {"config": ModelConfig, "meta": {string: string}}
//! count      u64       number of tensors
//! tensor*    name_len u32, name (UTF-8), ndim u32, dims u64 × ndim,
//!            values f64 × Π dims
//! ```
//!
//! Values are stored bit-exactly, so save → load reproduces every parameter.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Result, SwanError};
use crate::params::SegmentScorerParams;

pub const MAGIC: &[u8; 8] = b"SWANCKPT";
pub const VERSION: u32 = 1;

/// Named tensor: `(name, shape, values)`.
pub type NamedTensor = (String, Vec<usize>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn from_params(params: &SegmentScorerParams) -> Self {
        Self {
            config: params.config,
            meta: BTreeMap::new(),
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| (t.name, t.shape, t.data.to_vec()))
                .collect(),
        }
    }

    pub fn params(&self) -> Result<SegmentScorerParams> {
        SegmentScorerParams::from_named(self.config, &self.tensors)
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.0 == name)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            config: self.config,
            meta: self.meta.clone(),
        })
        .map_err(|e| SwanError::Checkpoint(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (name, shape, data) in &self.tensors {
            let expected: usize = shape.iter().product();
            if expected != data.len() {
                return Err(SwanError::Checkpoint(format!(
                    "tensor {name} has {} values for shape {shape:?}",
                    data.len()
                )));
            }
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for &d in shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SwanError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(SwanError::Checkpoint(format!("unsupported version {version}")));
        }
        let header_len = read_u64(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header: Header =
            serde_json::from_slice(&header).map_err(|e| SwanError::Checkpoint(e.to_string()))?;
        let count = read_u64(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name =
                String::from_utf8(name).map_err(|e| SwanError::Checkpoint(e.to_string()))?;
            let ndim = read_u32(&mut r)? as usize;
            let shape = (0..ndim)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push((name, shape, data));
        }
        Ok(Self {
            config: header.config,
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            vocab_size: 3,
            input_dim: 2,
            hidden: 4,
            connector_hidden: 2,
            max_seg_len: 2,
            embed_dim: 3,
            layers: 2,
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let p = SegmentScorerParams::init(cfg(), 42).unwrap();
        let mut ck = Checkpoint::from_params(&p);
        ck.meta.insert("output_vocab".into(), "a b c".into());
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.params().unwrap(), p);
        let mut buf2 = Vec::new();
        back.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::read_from(&b"NOTACKPT\x01\0\0\0"[..]).is_err());
        let p = SegmentScorerParams::init(cfg(), 1).unwrap();
        let mut buf = Vec::new();
        Checkpoint::from_params(&p).write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(Checkpoint::read_from(&buf[..]).is_err());
    }
}
