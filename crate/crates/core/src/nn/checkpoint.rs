//! Checkpoint codec: magic `MLPK`, u32 version, u32 param_count, then per
//! parameter u32 name_len, name, u32 rank, dims (u32 each), f64 values,
//! all little-endian.

use alloc::string::String;
use alloc::vec::Vec;

use super::tensor::{Parameter, Tensor};

const MAGIC: &[u8; 4] = b"MLPK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    BadMagic,
    VersionMismatch { found: u32 },
    Truncated,
    /// A parameter in the file has no counterpart (or the wrong shape) in
    /// the model being restored.
    ParamMismatch { name: String },
}

impl core::fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CheckpointError::BadMagic => write!(f, "bad checkpoint magic"),
            CheckpointError::VersionMismatch { found } => {
                write!(f, "unsupported checkpoint version {found}")
            }
            CheckpointError::Truncated => write!(f, "truncated checkpoint"),
            CheckpointError::ParamMismatch { name } => {
                write!(f, "checkpoint parameter '{name}' does not match the model")
            }
        }
    }
}

pub fn save_checkpoint(params: &[Parameter]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        let name = p.name();
        let v = p.value();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(v.rows as u32).to_le_bytes());
        out.extend_from_slice(&(v.cols as u32).to_le_bytes());
        for x in &v.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        if end > self.buf.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decode a checkpoint into (name, tensor) pairs.
pub fn load_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, CheckpointError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| CheckpointError::Truncated)?;
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let (rows, cols) = match dims.as_slice() {
            [r, c] => (*r, *c),
            [n] => (1, *n),
            _ => return Err(CheckpointError::ParamMismatch { name }),
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        out.push((name, Tensor::from_rows(rows, cols, data)));
    }
    Ok(out)
}

/// Restore values into `params` by name; every model parameter must be
/// present in the file with a matching shape.
pub fn restore_into(params: &[Parameter], bytes: &[u8]) -> Result<(), CheckpointError> {
    let loaded = load_checkpoint(bytes)?;
    for p in params {
        let name = p.name();
        let found = loaded.iter().find(|(n, _)| *n == name);
        let Some((_, t)) = found else {
            return Err(CheckpointError::ParamMismatch { name });
        };
        let v = p.value();
        if !v.same_shape(t) {
            return Err(CheckpointError::ParamMismatch { name });
        }
        p.set_value(t.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn round_trip() {
        let p = Parameter::new("layer.weight", Tensor::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let q = Parameter::new("layer.bias", Tensor::row(vec![0.5, -0.5, 0.25]));
        let bytes = save_checkpoint(&[p.clone(), q.clone()]);
        let loaded = load_checkpoint(&bytes).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "layer.weight");
        assert_eq!(loaded[0].1, p.value());

        let p2 = Parameter::zeros("layer.weight", 2, 3);
        let q2 = Parameter::zeros("layer.bias", 1, 3);
        restore_into(&[p2.clone(), q2.clone()], &bytes).unwrap();
        assert_eq!(p2.value(), p.value());
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert_eq!(load_checkpoint(b"ML").unwrap_err(), CheckpointError::Truncated);
        assert_eq!(load_checkpoint(b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").unwrap_err(), CheckpointError::BadMagic);
        let p = Parameter::new("w", Tensor::scalar(1.0));
        let bytes = save_checkpoint(&[p]);
        assert_eq!(
            load_checkpoint(&bytes[..bytes.len() - 3]).unwrap_err(),
            CheckpointError::Truncated
        );
    }

    #[test]
    fn save_is_deterministic() {
        let p = Parameter::new("w", Tensor::row(vec![1.0, 2.0]));
        assert_eq!(save_checkpoint(&[p.clone()]), save_checkpoint(&[p]));
    }
}
