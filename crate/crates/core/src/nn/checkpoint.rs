//! Named-tensor checkpoints.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic "SAMCKPT\0" | version u32 = 1 | meta_len u32 | meta [meta_len]u8 (UTF-8 JSON)
//! n_tensors u32
//! per tensor: name_len u16 | name | ndim u32 | dims [ndim]u32 | values [prod(dims)]f32
//! ```
//!
//! Values are stored as f32, so a restored model matches the saved one up to
//! f32 rounding.

use std::path::Path;

use ndarray::Array2;

use super::{Module, Param};

pub const MAGIC: &[u8; 8] = b"SAMCKPT\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}, expected {VERSION}")]
    BadVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("tensor {name}: {message}")]
    Mismatch { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn from_module(meta: String, module: &impl Module) -> Self {
        let tensors = module
            .params()
            .into_iter()
            .map(|p| Tensor {
                name: p.name.clone(),
                dims: p.value.shape().to_vec(),
                values: p.value.iter().map(|&v| v as f32).collect(),
            })
            .collect();
        Self { meta, tensors }
    }

    /// Copies tensors into `module`, matching by position, name and shape.
    pub fn restore_into(&self, module: &mut impl Module) -> Result<(), CheckpointError> {
        let mut params = module.params_mut();
        if params.len() != self.tensors.len() {
            return Err(CheckpointError::Malformed(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (p, t) in params.iter_mut().zip(&self.tensors) {
            restore_param(p, t)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.meta.as_bytes());
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            buf.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            buf.extend_from_slice(t.name.as_bytes());
            buf.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], CheckpointError> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(CheckpointError::Truncated(bytes.len()))?;
            let out = &bytes[pos..end];
            pos = end;
            Ok(out)
        };
        if take(8).ok() != Some(MAGIC.as_slice()) {
            return Err(CheckpointError::BadMagic);
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let meta_len = u32_at(take(4)?) as usize;
        let meta = String::from_utf8(take(meta_len)?.to_vec())
            .map_err(|_| CheckpointError::Malformed("metadata is not UTF-8".into()))?;
        let count = u32_at(take(4)?) as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(name_len)?.to_vec())
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
            let ndim = u32_at(take(4)?) as usize;
            let mut dims = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                dims.push(u32_at(take(4)?) as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| CheckpointError::Malformed(format!("tensor {name} is too large")))?;
            let raw = take(n.checked_mul(4).ok_or(CheckpointError::Truncated(bytes.len()))?)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(Tensor { name, dims, values });
        }
        if pos != bytes.len() {
            return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Self { meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn restore_param(p: &mut Param, t: &Tensor) -> Result<(), CheckpointError> {
    if p.name != t.name {
        return Err(CheckpointError::Mismatch {
            name: t.name.clone(),
            message: format!("expected parameter {}", p.name),
        });
    }
    if p.value.shape() != t.dims.as_slice() {
        return Err(CheckpointError::Mismatch {
            name: t.name.clone(),
            message: format!("shape {:?} does not match model shape {:?}", t.dims, p.value.shape()),
        });
    }
    if t.values.iter().any(|v| !v.is_finite()) {
        return Err(CheckpointError::Mismatch {
            name: t.name.clone(),
            message: "contains non-finite values".into(),
        });
    }
    let values = t.values.iter().map(|&v| v as f64).collect();
    p.value = Array2::from_shape_vec(p.value.raw_dim(), values).expect("shape checked above");
    p.zero_grad();
    Ok(())
}
