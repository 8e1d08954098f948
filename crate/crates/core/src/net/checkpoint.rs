//! Binary parameter checkpoints.
//!
//! ```text
//! magic        8 bytes  "POSENETW"
//! version      u32
//! config_len   u32      length of the JSON NetworkConfig that follows
//! config       config_len bytes
//! tensors      u32      tensor count
//! per tensor:  rank u32, dims u32 x rank, data f32 x prod(dims)
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use super::model::{NetworkConfig, NetworkParams, Params, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"POSENETW";
pub const VERSION: u32 = 1;

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let config = serde_json::to_vec(params.config()).expect("config serializes");
    let mut out = Vec::with_capacity(16 + config.len() + 4 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(params.tensors().len() as u32).to_le_bytes());
    for t in params.tensors() {
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<NetworkParams, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a parameter checkpoint".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let n = r.u32()? as usize;
    let config: NetworkConfig = serde_json::from_slice(r.take(n)?).map_err(|e| format!("bad config: {e}"))?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    let template = Params::<f32>::zeros(&config).map_err(|e| e.to_string())?;
    for i in 0..count {
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(4).ok_or("tensor too large")?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let name = template.tensors().get(i).map(|t| t.name.clone()).unwrap_or_default();
        tensors.push(Tensor { name, shape, data });
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let params = Params::from_parts(config, tensors).map_err(|e| e.to_string())?;
    if !params.is_finite() {
        return Err("non-finite parameter".into());
    }
    Ok(params)
}

pub fn save(params: &NetworkParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })
}

/// Loads and refuses a checkpoint whose stored config differs from
/// `expected`.
pub fn load_matching(path: &Path, expected: &NetworkConfig) -> Result<NetworkParams> {
    let params = load(path)?;
    if params.config() != expected {
        return Err(Error::Config(format!(
            "checkpoint {} was trained with {:?}, expected {:?}",
            path.display(),
            params.config(),
            expected
        )));
    }
    Ok(params)
}
