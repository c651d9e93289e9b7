//! IDX binary tensors.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! offset 0  : 0x00 0x00
//! offset 2  : element type code
//! offset 3  : number of dimensions n
//! offset 4  : n x u32 dimension sizes
//! then      : product(dims) elements, row-major
//! ```
//!
//! MNIST image files start with `0x00000803` (unsigned bytes, three dims) and
//! label files with `0x00000801`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdxError {
    #[error("truncated input: needed {needed} bytes, input ends at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("bad magic at offset 0: expected two zero bytes, found {0:#04x} {1:#04x}")]
    BadMagic(u8, u8),
    #[error("unknown element type code {code:#04x} at offset 2")]
    UnknownType { code: u8 },
    #[error("dimension sizes starting at offset 4 overflow the addressable size")]
    DimensionOverflow,
    #[error("{extra} unexpected bytes after the data, starting at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("tensor has {found} elements but its dimensions require {expected}")]
    ElementCount { expected: usize, found: usize },
    #[error("dimension {0} does not fit in 32 bits")]
    DimensionTooLarge(usize),
    #[error("{0} dimensions exceed the 255 allowed")]
    TooManyDimensions(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxType {
    U8,
    I8,
    I16,
    I32,
    F32,
    F64,
}

impl IdxType {
    pub fn code(self) -> u8 {
        match self {
            IdxType::U8 => 0x08,
            IdxType::I8 => 0x09,
            IdxType::I16 => 0x0B,
            IdxType::I32 => 0x0C,
            IdxType::F32 => 0x0D,
            IdxType::F64 => 0x0E,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0x08 => IdxType::U8,
            0x09 => IdxType::I8,
            0x0B => IdxType::I16,
            0x0C => IdxType::I32,
            0x0D => IdxType::F32,
            0x0E => IdxType::F64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            IdxType::U8 | IdxType::I8 => 1,
            IdxType::I16 => 2,
            IdxType::I32 | IdxType::F32 => 4,
            IdxType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl IdxData {
    pub fn dtype(&self) -> IdxType {
        match self {
            IdxData::U8(_) => IdxType::U8,
            IdxData::I8(_) => IdxType::I8,
            IdxData::I16(_) => IdxType::I16,
            IdxData::I32(_) => IdxType::I32,
            IdxData::F32(_) => IdxType::F32,
            IdxData::F64(_) => IdxType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::I8(v) => v.len(),
            IdxData::I16(v) => v.len(),
            IdxData::I32(v) => v.len(),
            IdxData::F32(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    dims: Vec<usize>,
    data: IdxData,
}

impl IdxTensor {
    pub fn new(dims: Vec<usize>, data: IdxData) -> Result<Self, IdxError> {
        if dims.len() > 255 {
            return Err(IdxError::TooManyDimensions(dims.len()));
        }
        if let Some(&d) = dims.iter().find(|&&d| u32::try_from(d).is_err()) {
            return Err(IdxError::DimensionTooLarge(d));
        }
        let expected = element_count(&dims).ok_or(IdxError::DimensionOverflow)?;
        if expected != data.len() {
            return Err(IdxError::ElementCount { expected, found: data.len() });
        }
        Ok(IdxTensor { dims, data })
    }

    pub fn dtype(&self) -> IdxType {
        self.data.dtype()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &IdxData {
        &self.data
    }

    pub fn into_data(self) -> IdxData {
        self.data
    }

    /// The 32-bit magic word, e.g. `0x00000803` for MNIST images.
    pub fn magic(&self) -> u32 {
        ((self.dtype().code() as u32) << 8) | self.dims.len() as u32
    }
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IdxError> {
        let end = self.pos.checked_add(n).ok_or(IdxError::DimensionOverflow)?;
        if end > self.bytes.len() {
            return Err(IdxError::Truncated { offset: self.bytes.len(), needed: end });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

macro_rules! decode {
    ($raw:expr, $t:ty, $n:expr) => {
        $raw.chunks_exact($n).map(|c| <$t>::from_be_bytes(c.try_into().unwrap())).collect()
    };
}

/// Parse a complete IDX buffer.
///
/// Sizes are checked against the buffer before anything is allocated, so a
/// hostile header cannot trigger a large allocation.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, IdxError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic[0] != 0 || magic[1] != 0 {
        return Err(IdxError::BadMagic(magic[0], magic[1]));
    }
    let dtype = IdxType::from_code(magic[2]).ok_or(IdxError::UnknownType { code: magic[2] })?;
    let ndims = magic[3] as usize;
    let header = r.take(4 * ndims)?;
    let dims: Vec<usize> = header
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = element_count(&dims).ok_or(IdxError::DimensionOverflow)?;
    let nbytes = count.checked_mul(dtype.size()).ok_or(IdxError::DimensionOverflow)?;
    let raw = r.take(nbytes)?;
    if r.pos != bytes.len() {
        return Err(IdxError::TrailingBytes { offset: r.pos, extra: bytes.len() - r.pos });
    }
    let data = match dtype {
        IdxType::U8 => IdxData::U8(raw.to_vec()),
        IdxType::I8 => IdxData::I8(raw.iter().map(|&b| b as i8).collect()),
        IdxType::I16 => IdxData::I16(decode!(raw, i16, 2)),
        IdxType::I32 => IdxData::I32(decode!(raw, i32, 4)),
        IdxType::F32 => IdxData::F32(decode!(raw, f32, 4)),
        IdxType::F64 => IdxData::F64(decode!(raw, f64, 8)),
    };
    Ok(IdxTensor { dims, data })
}

/// Encode a tensor; the exact inverse of [`parse_idx`].
pub fn serialize_idx(t: &IdxTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * t.dims.len() + t.data.len() * t.dtype().size());
    out.extend_from_slice(&t.magic().to_be_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    match &t.data {
        IdxData::U8(v) => out.extend_from_slice(v),
        IdxData::I8(v) => out.extend(v.iter().map(|&b| b as u8)),
        IdxData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
    }
    out
}
