//! In-memory tensors and the EALT binary layout.
//!
//! An EALT file is, little-endian throughout:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "EALT" (0x45 0x41 0x4C 0x54)
//! 4       2           version, u16 = 1
//! 6       1           dtype: 0 = u8, 1 = f32
//! 7       1           rank: 2 or 3
//! 8       4 * rank    dims as u32, (H, W) or (C, H, W)
//! ...                 row-major payload
//! ```
//!
//! Only the byte codec lives here; reading and writing files is the job of
//! the `edgeal` crate.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Grid;
use crate::uncertainty::ProbabilityMap;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EALT";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("unsupported rank {0}")]
    UnsupportedRank(u8),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid dims: every dimension must be at least 1")]
    EmptyDims,
    #[error("dimension {0} does not fit in u32")]
    DimTooLarge(usize),
    #[error("payload length {found} does not match dims (expected {expected})")]
    PayloadLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    U8 = 0,
    F32 = 1,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 => 4,
        }
    }

    fn from_code(code: u8) -> Result<Self, FormatError> {
        match code {
            0 => Ok(DType::U8),
            1 => Ok(DType::F32),
            other => Err(FormatError::UnsupportedDtype(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A rank-2 or rank-3 array with a u8 or f32 payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, FormatError> {
        if dims.len() != 2 && dims.len() != 3 {
            return Err(FormatError::UnsupportedRank(dims.len().min(255) as u8));
        }
        if dims.contains(&0) {
            return Err(FormatError::EmptyDims);
        }
        if let Some(&d) = dims.iter().find(|&&d| d > u32::MAX as usize) {
            return Err(FormatError::DimTooLarge(d));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(FormatError::PayloadLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_grid_f32(grid: &Grid<f32>) -> Self {
        Tensor {
            dims: alloc::vec![grid.height(), grid.width()],
            data: TensorData::F32(grid.as_slice().to_vec()),
        }
    }

    pub fn from_grid_u8(grid: &Grid<u8>) -> Self {
        Tensor {
            dims: alloc::vec![grid.height(), grid.width()],
            data: TensorData::U8(grid.as_slice().to_vec()),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::U8(_) => DType::U8,
            TensorData::F32(_) => DType::F32,
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    /// Interprets a rank-2 tensor as an f32 image. u8 payloads are scaled
    /// into [0, 1] by 1/255.
    pub fn to_image(&self) -> Result<Grid<f32>> {
        let (h, w) = self.plane_dims()?;
        let data = match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&b| b as f32 / 255.0).collect(),
        };
        Grid::from_vec(h, w, data)
    }

    /// Interprets a rank-2 u8 tensor as a class-id map.
    pub fn to_class_map(&self) -> Result<Grid<u8>> {
        let (h, w) = self.plane_dims()?;
        match &self.data {
            TensorData::U8(v) => Grid::from_vec(h, w, v.clone()),
            TensorData::F32(_) => Err(Error::InvalidArgument(
                "class maps must have dtype u8".into(),
            )),
        }
    }

    /// Interprets a rank-3 f32 tensor as a C×H×W probability map, checking
    /// per-pixel sums at `tolerance`.
    pub fn to_probability_map(&self, tolerance: f32) -> Result<ProbabilityMap> {
        let [c, h, w] = self.dims[..] else {
            return Err(Error::shape("rank-3 tensor", 3, self.rank()));
        };
        match &self.data {
            TensorData::F32(v) => ProbabilityMap::with_tolerance(c, h, w, v.clone(), tolerance),
            TensorData::U8(_) => Err(Error::InvalidArgument(
                "probability maps must have dtype f32".into(),
            )),
        }
    }

    pub fn from_probability_map(p: &ProbabilityMap) -> Self {
        let (c, h, w) = p.dims();
        Tensor {
            dims: vec![c, h, w],
            data: TensorData::F32(p.as_slice().to_vec()),
        }
    }

    fn plane_dims(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [h, w] => Ok((h, w)),
            _ => Err(Error::shape("rank-2 tensor", 2, self.rank())),
        }
    }

    pub fn header_len(&self) -> usize {
        8 + 4 * self.rank()
    }

    pub fn encoded_len(&self) -> usize {
        self.header_len() + self.data.len() * self.dtype().size()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.dtype() as u8);
        out.push(self.rank() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let need = |expected: usize| {
            if bytes.len() < expected {
                Err(FormatError::Truncated {
                    expected,
                    found: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(4)?;
        if bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic);
        }
        need(8)?;
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let dtype = DType::from_code(bytes[6])?;
        let rank = bytes[7];
        if rank != 2 && rank != 3 {
            return Err(FormatError::UnsupportedRank(rank));
        }
        let header = 8 + 4 * rank as usize;
        need(header)?;
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        if dims.contains(&0) {
            return Err(FormatError::EmptyDims);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(FormatError::Truncated {
                expected: usize::MAX,
                found: bytes.len(),
            })?;
        let total = count
            .checked_mul(dtype.size())
            .and_then(|p| p.checked_add(header))
            .ok_or(FormatError::Truncated {
                expected: usize::MAX,
                found: bytes.len(),
            })?;
        need(total)?;
        if bytes.len() > total {
            return Err(FormatError::TrailingBytes(bytes.len() - total));
        }
        let payload = &bytes[header..total];
        let data = match dtype {
            DType::U8 => TensorData::U8(payload.to_vec()),
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        };
        Ok(Tensor { dims, data })
    }
}
