//! Binary tensor checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SOMA" | version: u32 | n_tensors: u32
//! per tensor: name_len: u32 | name: utf-8 | ndim: u32 | dims: u64 × ndim | dtype: u8 | payload
//! crc32 of every preceding byte: u32
//! ```
//!
//! The only dtype is `1` (f64), so a payload is `product(dims) × 8` bytes.

use std::collections::HashSet;
use std::path::Path;

use soma_core::train::{Block, BlockModel, LayerId, LayerWeight, Linear};
use soma_core::{AdapterKind, LinearAdapter, Matrix};

use crate::error::{CliError, CliResult};
use crate::fsutil;

pub const MAGIC: [u8; 4] = *b"SOMA";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("truncated checkpoint")]
    Truncated,
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("tensor name is not valid utf-8")]
    BadName,
    #[error("duplicate tensor `{0}`")]
    DuplicateName(String),
    #[error("tensor `{name}` has {len} values for shape {shape:?}")]
    ShapeMismatch { name: String, shape: Vec<u64>, len: usize },
    #[error("tensor `{0}` not found")]
    Missing(String),
    #[error("tensor `{name}` has shape {shape:?}, expected {expected}")]
    WrongRank { name: String, shape: Vec<u64>, expected: &'static str },
    #[error("tensor `{name}`: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<u64>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<u64>, data: Vec<f64>) -> Result<Self, CheckpointError> {
        let name = name.into();
        if numel(&shape) != Some(data.len()) {
            return Err(CheckpointError::ShapeMismatch { name, shape, len: data.len() });
        }
        Ok(Self { name, shape, data })
    }

    pub fn from_matrix(name: impl Into<String>, m: &Matrix) -> Self {
        Self { name: name.into(), shape: vec![m.rows() as u64, m.cols() as u64], data: m.as_slice().to_vec() }
    }

    pub fn vector(name: impl Into<String>, v: &[f64]) -> Self {
        Self { name: name.into(), shape: vec![v.len() as u64], data: v.to_vec() }
    }

    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self { name: name.into(), shape: Vec::new(), data: vec![v] }
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn to_matrix(&self) -> Result<Matrix, CheckpointError> {
        if !self.is_matrix() {
            return Err(CheckpointError::WrongRank { name: self.name.clone(), shape: self.shape.clone(), expected: "2-D" });
        }
        Matrix::from_vec(self.shape[0] as usize, self.shape[1] as usize, self.data.clone())
            .map_err(|e| CheckpointError::Invalid { name: self.name.clone(), reason: e.to_string() })
    }

    pub fn to_scalar(&self) -> Result<f64, CheckpointError> {
        match (self.shape.len(), self.data.as_slice()) {
            (0, [v]) => Ok(*v),
            _ => Err(CheckpointError::WrongRank { name: self.name.clone(), shape: self.shape.clone(), expected: "a scalar" }),
        }
    }
}

fn numel(shape: &[u64]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(usize::try_from(d).ok()?))
}

/// An ordered set of uniquely named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tensors(tensors: impl IntoIterator<Item = Tensor>) -> Result<Self, CheckpointError> {
        let mut c = Self::new();
        for t in tensors {
            c.push(t)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, t: Tensor) -> Result<(), CheckpointError> {
        if self.get(&t.name).is_some() {
            return Err(CheckpointError::DuplicateName(t.name));
        }
        if numel(&t.shape) != Some(t.data.len()) {
            return Err(CheckpointError::ShapeMismatch { name: t.name, shape: t.shape, len: t.data.len() });
        }
        self.tensors.push(t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.get(name).ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.iter().map(|t| 32 + t.name.len() + 8 * (t.shape.len() + t.data.len())).sum();
        let mut out = Vec::with_capacity(16 + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.push(DTYPE_F64);
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 16 {
            return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC { CheckpointError::BadMagic } else { CheckpointError::Truncated });
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(CheckpointError::CrcMismatch { stored, computed });
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let n = r.u32()? as usize;
        let mut seen = HashSet::new();
        let mut tensors = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?).map_err(|_| CheckpointError::BadName)?.to_string();
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim.min(64));
            for _ in 0..ndim {
                shape.push(r.u64()?);
            }
            let dtype = r.take(1)?[0];
            if dtype != DTYPE_F64 {
                return Err(CheckpointError::UnsupportedDtype(dtype));
            }
            let count = numel(&shape).ok_or(CheckpointError::Truncated)?;
            let raw = r.take(count.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            if !seen.insert(name.clone()) {
                return Err(CheckpointError::DuplicateName(name));
            }
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::TrailingBytes(body.len() - r.pos));
        }
        Ok(Self { tensors })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = fsutil::read(path)?;
        Self::from_bytes(&bytes).map_err(|source| CliError::Checkpoint { path: path.to_path_buf(), source })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(CheckpointError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Suffixes of the tensors that store one adapter, after the weight's own name.
pub const ADAPTER_PARTS: [&str; 5] = ["w_res", "b", "a", "b0", "a0"];

fn kind_code(kind: AdapterKind) -> f64 {
    match kind {
        AdapterKind::Soma => 1.0,
        AdapterKind::Pissa => 2.0,
        AdapterKind::Lora => 3.0,
        AdapterKind::None => 0.0,
    }
}

fn kind_from_code(name: &str, code: f64) -> Result<AdapterKind, CheckpointError> {
    Ok(match code {
        c if c == 1.0 => AdapterKind::Soma,
        c if c == 2.0 => AdapterKind::Pissa,
        c if c == 3.0 => AdapterKind::Lora,
        _ => return Err(CheckpointError::Invalid { name: name.to_string(), reason: format!("unknown adapter kind {code}") }),
    })
}

/// Tensors `<prefix>.w_res`, `.b`, `.a`, `.b0`, `.a0`, `.scale` and `.kind`.
pub fn adapter_tensors(prefix: &str, ad: &LinearAdapter) -> Vec<Tensor> {
    let mats = [ad.w_res(), ad.b(), ad.a(), ad.b0(), ad.a0()];
    let mut out: Vec<Tensor> =
        ADAPTER_PARTS.iter().zip(mats).map(|(part, m)| Tensor::from_matrix(format!("{prefix}.{part}"), m)).collect();
    out.push(Tensor::scalar(format!("{prefix}.scale"), ad.scale()));
    out.push(Tensor::scalar(format!("{prefix}.kind"), kind_code(ad.kind())));
    out
}

/// True for the names [`adapter_tensors`] produces for `prefix`.
pub fn is_adapter_part(prefix: &str, name: &str) -> bool {
    name.strip_prefix(prefix)
        .and_then(|rest| rest.strip_prefix('.'))
        .is_some_and(|rest| ADAPTER_PARTS.contains(&rest) || rest == "scale" || rest == "kind")
}

/// Rebuilds the adapter stored under `prefix`, if there is one.
pub fn read_adapter(ckpt: &Checkpoint, prefix: &str) -> Result<Option<LinearAdapter>, CheckpointError> {
    let w_res_name = format!("{prefix}.w_res");
    if ckpt.get(&w_res_name).is_none() {
        return Ok(None);
    }
    let mat = |part: &str| ckpt.require(&format!("{prefix}.{part}"))?.to_matrix();
    let scale = ckpt.require(&format!("{prefix}.scale"))?.to_scalar()?;
    let kind_name = format!("{prefix}.kind");
    let kind = kind_from_code(&kind_name, ckpt.require(&kind_name)?.to_scalar()?)?;
    LinearAdapter::from_parts(kind, scale, mat("w_res")?, mat("b")?, mat("a")?, mat("b0")?, mat("a0")?)
        .map(Some)
        .map_err(|e| CheckpointError::Invalid { name: prefix.to_string(), reason: e.to_string() })
}

/// Every layer as `<layer>.weight` (or its adapter tensors) and `<layer>.bias`.
pub fn model_to_checkpoint(model: &BlockModel) -> Checkpoint {
    let mut tensors = Vec::new();
    for id in model.layer_ids() {
        let layer = model.layer(id).expect("listed layer");
        let weight = format!("{id}.weight");
        match &layer.weight {
            LayerWeight::Frozen(w) | LayerWeight::Trainable { w, .. } => tensors.push(Tensor::from_matrix(weight, w)),
            LayerWeight::Adapter(ad) => tensors.extend(adapter_tensors(&weight, ad)),
        }
        tensors.push(Tensor::vector(format!("{id}.bias"), &layer.bias));
    }
    Checkpoint::from_tensors(tensors).expect("layer names are unique")
}

/// Inverse of [`model_to_checkpoint`]. Layers come back frozen (or as
/// adapters with frozen biases); trainability is a property of a run.
pub fn checkpoint_to_model(ckpt: &Checkpoint) -> Result<BlockModel, CheckpointError> {
    let layer = |id: LayerId| -> Result<Linear, CheckpointError> {
        let weight_name = format!("{id}.weight");
        let weight = match read_adapter(ckpt, &weight_name)? {
            Some(ad) => LayerWeight::Adapter(ad),
            None => LayerWeight::Frozen(ckpt.require(&weight_name)?.to_matrix()?),
        };
        let bias_name = format!("{id}.bias");
        let bias = ckpt.require(&bias_name)?;
        if bias.shape.len() != 1 {
            return Err(CheckpointError::WrongRank { name: bias_name, shape: bias.shape.clone(), expected: "1-D" });
        }
        Linear::new(weight, bias.data.clone(), false).map_err(|e| CheckpointError::Invalid { name: id.to_string(), reason: e.to_string() })
    };
    let mut blocks = Vec::new();
    while ckpt.tensors().iter().any(|t| t.name.starts_with(&format!("blocks.{}.", blocks.len()))) {
        let i = blocks.len();
        blocks.push(Block { lin1: layer(LayerId::Lin1(i))?, lin2: layer(LayerId::Lin2(i))? });
    }
    let model = BlockModel { embed: layer(LayerId::Embed)?, blocks, head: layer(LayerId::Head)? };
    model
        .check_dims()
        .map_err(|e| CheckpointError::Invalid { name: "model".into(), reason: e.to_string() })?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        Checkpoint::from_tensors([
            Tensor::from_matrix("w", &Matrix::from_rows(&[&[1.0, -2.5], &[f64::MIN_POSITIVE, 3e300]]).unwrap()),
            Tensor::vector("b", &[0.0, -0.0]),
            Tensor::scalar("s", 0.1),
            Tensor::new("empty", vec![0, 3], Vec::new()).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.get("b").unwrap().data[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(&bytes[..4], b"SOMA");
    }

    #[test]
    fn header_errors() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::BadMagic));
        assert_eq!(Checkpoint::from_bytes(b"SOM"), Err(CheckpointError::Truncated));

        let mut bytes = sample().to_bytes();
        bytes[4] = 9;
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(Checkpoint::from_bytes(&bytes), Err(CheckpointError::UnsupportedVersion(9)));
    }

    #[test]
    fn duplicates_and_bad_shapes_rejected() {
        let mut c = sample();
        assert_eq!(c.push(Tensor::scalar("s", 1.0)), Err(CheckpointError::DuplicateName("s".into())));
        assert!(Tensor::new("x", vec![2, 2], vec![1.0]).is_err());
    }

    #[test]
    fn corrupted_byte_is_detected() {
        let bytes = sample().to_bytes();
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x40;
            assert!(Checkpoint::from_bytes(&b).is_err(), "byte {i}");
        }
    }
}
