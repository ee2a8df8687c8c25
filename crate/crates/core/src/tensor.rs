//! Feature and mask tensors plus the FTEN container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | field                                   |
//! |--------------|-----------------------------------------|
//! | 4            | magic `FTEN`                            |
//! | u32          | version (1)                             |
//! | u32          | rank                                    |
//! | rank x u64   | dims, outermost first                   |
//! | u8           | dtype: 1 = f32, 2 = u8                  |
//! | payload      | row-major elements                      |

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{bail, KngError, Result};

pub const FTEN_MAGIC: &[u8; 4] = b"FTEN";
pub const FTEN_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
}

/// Patch embeddings of one image: `height x width` grid, `dim` channels,
/// row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * dim {
            bail!(
                Validation,
                "feature tensor {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                data.len()
            );
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            bail!(Validation, "non-finite feature value at flat index {pos}");
        }
        Ok(Self {
            height,
            width,
            dim,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, dim: usize) -> Self {
        Self {
            height,
            width,
            dim,
            data: vec![0.0; height * width * dim],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn patch_count(&self) -> usize {
        self.height * self.width
    }

    pub fn patch(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn patches(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Sub-grid `[row0, row0+h) x [col0, col0+w)`, all channels.
    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> Result<Self> {
        if row0 + h > self.height || col0 + w > self.width {
            bail!(
                Argument,
                "crop {h}x{w}@({row0},{col0}) exceeds grid {}x{}",
                self.height,
                self.width
            );
        }
        let mut data = Vec::with_capacity(h * w * self.dim);
        for r in row0..row0 + h {
            for c in col0..col0 + w {
                data.extend_from_slice(self.patch(r, c));
            }
        }
        Ok(Self {
            height: h,
            width: w,
            dim: self.dim,
            data,
        })
    }
}

/// Binary ground-truth mask at pixel resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTensor {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl MaskTensor {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            bail!(
                Validation,
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            );
        }
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            bail!(Validation, "mask value {} at {pos} is not binary", data[pos]);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn anomalous_pixels(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// Rank-2 f32 grid; how anomaly maps travel on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTensor {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

/// Any tensor the FTEN container can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Features(FeatureTensor),
    Mask(MaskTensor),
    Grid(GridTensor),
}

impl From<FeatureTensor> for Tensor {
    fn from(t: FeatureTensor) -> Self {
        Tensor::Features(t)
    }
}

impl From<MaskTensor> for Tensor {
    fn from(t: MaskTensor) -> Self {
        Tensor::Mask(t)
    }
}

impl From<GridTensor> for Tensor {
    fn from(t: GridTensor) -> Self {
        Tensor::Grid(t)
    }
}

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let (dims, dtype): (Vec<usize>, DType) = match t {
        Tensor::Features(f) => (vec![f.height, f.width, f.dim], DType::F32),
        Tensor::Mask(m) => (vec![m.height, m.width], DType::U8),
        Tensor::Grid(g) => (vec![g.height, g.width], DType::F32),
    };
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(FTEN_MAGIC);
    out.extend_from_slice(&FTEN_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    out.push(dtype as u8);
    match t {
        Tensor::Features(f) => push_f32(&mut out, &f.data)?,
        Tensor::Grid(g) => {
            if g.data.len() != g.height * g.width {
                bail!(Validation, "grid payload length mismatch");
            }
            push_f32(&mut out, &g.data)?
        }
        Tensor::Mask(m) => out.extend_from_slice(&m.data),
    }
    Ok(out)
}

fn push_f32(out: &mut Vec<u8>, data: &[f32]) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        bail!(Validation, "refusing to write non-finite value at flat index {pos}");
    }
    out.reserve(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != FTEN_MAGIC {
        bail!(Format, "bad magic, expected FTEN");
    }
    let version = cur.u32()?;
    if version != FTEN_VERSION {
        bail!(Format, "unsupported FTEN version {version}");
    }
    let rank = cur.u32()? as usize;
    if !(1..=8).contains(&rank) {
        bail!(Format, "unsupported rank {rank}");
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(usize::try_from(cur.u64()?).map_err(|_| KngError::Format("dim overflow".into()))?);
    }
    let dtype = match cur.take(1)?[0] {
        1 => DType::F32,
        2 => DType::U8,
        other => bail!(Format, "unknown dtype code {other}"),
    };
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| KngError::Format("element count overflow".into()))?;
    let width = match dtype {
        DType::F32 => 4,
        DType::U8 => 1,
    };
    let payload = &bytes[cur.pos..];
    if payload.len() != count * width {
        bail!(
            Format,
            "payload truncated or oversized: header declares {count} elements ({} bytes), found {} bytes",
            count * width,
            payload.len()
        );
    }
    match (dtype, rank) {
        (DType::F32, 3) => {
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(Tensor::Features(FeatureTensor::new(dims[0], dims[1], dims[2], data)?))
        }
        (DType::F32, 2) => {
            let data: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                bail!(Validation, "non-finite value in grid payload");
            }
            Ok(Tensor::Grid(GridTensor {
                height: dims[0],
                width: dims[1],
                data,
            }))
        }
        (DType::U8, 2) => Ok(Tensor::Mask(MaskTensor::new(dims[0], dims[1], payload.to_vec())?)),
        (dtype, rank) => bail!(Format, "unsupported combination dtype {dtype:?} rank {rank}"),
    }
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(t)?;
    let mut f = fs::File::create(path).map_err(|e| KngError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| KngError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KngError::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| match e {
        KngError::Format(m) => KngError::Format(format!("{}: {m}", path.display())),
        KngError::Validation(m) => KngError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    match read_tensor(path.as_ref())? {
        Tensor::Features(f) => Ok(f),
        _ => bail!(Format, "{} is not a rank-3 f32 feature tensor", path.as_ref().display()),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskTensor> {
    match read_tensor(path.as_ref())? {
        Tensor::Mask(m) => Ok(m),
        _ => bail!(Format, "{} is not a rank-2 u8 mask", path.as_ref().display()),
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            bail!(Format, "unexpected end of data at byte {}", self.pos);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
