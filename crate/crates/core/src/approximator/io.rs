//! Flat binary parameter files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic       4 bytes  "SCQN"
//! version     u32
//! input_width u32
//! recurrent   u32
//! n_dense     u32
//! dense[k]    u32 x n_dense
//! actions     u32
//! count       u64      number of parameters
//! params      f64 x count
//! ```

use std::fs;
use std::path::Path;

use super::{Network, NetworkSpec, ParamVector};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SCQN";
pub const PARAM_FILE_VERSION: u32 = 1;

pub fn encode(spec: &NetworkSpec, params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    let mut put = |x: u32| out.extend_from_slice(&x.to_le_bytes());
    put(PARAM_FILE_VERSION);
    put(spec.input_width as u32);
    put(spec.recurrent_units as u32);
    put(spec.dense_widths.len() as u32);
    for &w in &spec.dense_widths {
        put(w as u32);
    }
    put(spec.num_actions as u32);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let s = self
            .buf
            .get(self.at..self.at + n)
            .ok_or_else(|| Error::ParamFile(format!("truncated at byte {}", self.at)))?;
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<(NetworkSpec, ParamVector)> {
    let mut r = Reader { buf, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::ParamFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != PARAM_FILE_VERSION {
        return Err(Error::ParamFile(format!("unsupported version {version}")));
    }
    let input_width = r.u32()? as usize;
    let recurrent_units = r.u32()? as usize;
    let n_dense = r.u32()? as usize;
    let dense_widths = (0..n_dense)
        .map(|_| r.u32().map(|w| w as usize))
        .collect::<Result<_>>()?;
    let num_actions = r.u32()? as usize;
    let spec = NetworkSpec {
        input_width,
        recurrent_units,
        dense_widths,
        num_actions,
    };
    spec.validate()?;
    let count = r.u64()? as usize;
    if count != spec.param_count() {
        return Err(Error::ParamFile(format!(
            "header says {count} parameters, spec implies {}",
            spec.param_count()
        )));
    }
    let params = r
        .take(8 * count)?
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if r.at != buf.len() {
        return Err(Error::ParamFile(format!(
            "{} trailing bytes",
            buf.len() - r.at
        )));
    }
    Ok((spec, ParamVector(params)))
}

pub fn save_params(path: &Path, net: &Network) -> Result<()> {
    fs::write(path, encode(net.spec(), net.params().as_slice())).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<Network> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (spec, params) = decode(&buf)?;
    Network::from_params(spec, params)
}
