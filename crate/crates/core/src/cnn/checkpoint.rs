//! Model checkpoints.
//!
//! Little-endian layout:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `DQKM` |
//! | 2 | version (`u16`, currently 1) |
//! | 12 | input height, width, channels (`u32` each) |
//! | 1 | activation (`0` ReLU, `1` GELU) |
//! | 8 | dropout rate (`f64`) |
//! | 4 | tensor count (`u32`, 10) |
//! | ... | per tensor, in layer order: length (`u32`) then `f64` values |
//!
//! Tensor order is conv1 weights and bias, batch-norm scale, shift, running
//! mean and running variance, conv2 weights and bias, dense weights and bias.

use std::fs;
use std::path::Path;

use super::layers::Activation;
use super::model::{Architecture, InputShape, ModelParams, TENSOR_NAMES};
use super::{CnnError, Result};
use crate::scalar::Real;

pub const MODEL_MAGIC: &[u8; 4] = b"DQKM";
pub const MODEL_VERSION: u16 = 1;

pub fn to_bytes<T: Real>(params: &ModelParams<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let InputShape {
        height,
        width,
        channels,
    } = params.arch.input;
    for d in [height, width, channels] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(match params.arch.activation {
        Activation::Relu => 0,
        Activation::Gelu => 1,
    });
    out.extend_from_slice(&params.arch.dropout.to_le_bytes());
    out.extend_from_slice(&(params.tensors.len() as u32).to_le_bytes());
    for t in &params.tensors {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        let s = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| CnnError::BadCheckpoint(format!("truncated at byte {}", self.at)))?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<ModelParams<T>> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != MODEL_MAGIC {
        return Err(CnnError::BadCheckpoint("not a DQKM file".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != MODEL_VERSION {
        return Err(CnnError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let input = InputShape::new(c.u32()?, c.u32()?, c.u32()?);
    let activation = match c.take(1)?[0] {
        0 => Activation::Relu,
        1 => Activation::Gelu,
        other => return Err(CnnError::BadCheckpoint(format!("activation code {other}"))),
    };
    let dropout = c.f64()?;
    let arch = Architecture::new(input, activation, dropout)?;
    let mut params = ModelParams::<T>::zeros(arch);
    if c.u32()? != params.tensors.len() {
        return Err(CnnError::BadCheckpoint("wrong tensor count".into()));
    }
    for (k, t) in params.tensors.iter_mut().enumerate() {
        let len = c.u32()?;
        if len != t.len() {
            return Err(CnnError::BadCheckpoint(format!(
                "{} has {len} values, expected {}",
                TENSOR_NAMES[k],
                t.len()
            )));
        }
        for v in t.iter_mut() {
            *v = T::of(c.f64()?);
        }
    }
    if c.at != bytes.len() {
        return Err(CnnError::BadCheckpoint("trailing bytes".into()));
    }
    Ok(params)
}

pub fn save_model<T: Real>(path: &Path, params: &ModelParams<T>) -> Result<()> {
    fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<ModelParams<T>> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let arch = Architecture::new(InputShape::new(9, 9, 36), Activation::Gelu, 0.6).unwrap();
        let mut p = ModelParams::<f64>::init(arch, 42);
        p.tensors[5][3] = 0.123_456_789_012_345_67;
        let bytes = to_bytes(&p);
        assert_eq!(&bytes[..4], b"DQKM");
        assert_eq!(from_bytes::<f64>(&bytes).unwrap(), p);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dqkm");
        save_model(&path, &p).unwrap();
        assert_eq!(load_model::<f64>(&path).unwrap(), p);
    }

    #[test]
    fn rejects_damage() {
        let arch = Architecture::new(InputShape::new(6, 6, 1), Activation::Relu, 0.5).unwrap();
        let bytes = to_bytes(&ModelParams::<f64>::init(arch, 1));
        assert!(from_bytes::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes::<f64>(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(from_bytes::<f64>(&magic), Err(CnnError::BadCheckpoint(_))));
    }
}
