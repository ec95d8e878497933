//! `PXF1` tensors and `PXW1` named-record bundles.
//!
//! ```text
//! PXF1: "PXF1" | u32 ndim | ndim × u32 dims | prod(dims) × f32     (all little-endian)
//! PXW1: "PXW1" | u32 count | count × (u32 name_len | name bytes | PXF1 tensor)
//! ```
//!
//! Both are bit-exact: encoding a decoded file reproduces the input bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

pub const TENSOR_MAGIC: &[u8; 4] = b"PXF1";
pub const BUNDLE_MAGIC: &[u8; 4] = b"PXW1";

/// Upper bound on `ndim` accepted by the decoder.
const MAX_NDIM: u32 = 16;

/// A dense row-major `f32` tensor of arbitrary rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n = element_count(&dims).ok_or_else(|| Error::shape("tensor dims overflow"))?;
        if n != data.len() {
            return Err(Error::shape(format!(
                "tensor dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn scalar(v: f32) -> Self {
        Self {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(values: Vec<f32>) -> Self {
        Self {
            dims: vec![values.len()],
            data: values,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        self.encode_into(&mut out);
        out
    }

    /// Decodes one complete tensor; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let tensor = cursor.tensor()?;
        if cursor.pos != bytes.len() {
            return Err(Error::format(
                cursor.pos,
                format!(
                    "length mismatch: {} trailing bytes",
                    bytes.len() - cursor.pos
                ),
            ));
        }
        Ok(tensor)
    }
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl From<&ImagePlane> for Tensor {
    fn from(plane: &ImagePlane) -> Self {
        let (h, w, c) = plane.dims();
        Tensor {
            dims: vec![h, w, c],
            data: plane.data().to_vec(),
        }
    }
}

impl TryFrom<Tensor> for ImagePlane {
    type Error = Error;

    /// Rank-2 tensors become single-channel planes; rank-3 map to `H×W×C`.
    fn try_from(t: Tensor) -> Result<Self> {
        let (h, w, c) = match *t.dims() {
            [h, w] => (h, w, 1),
            [h, w, c] => (h, w, c),
            ref d => {
                return Err(Error::shape(format!(
                    "a plane needs a rank-2 or rank-3 tensor, got dims {d:?}"
                )))
            }
        };
        ImagePlane::new(h, w, c, t.data)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(
                    self.pos,
                    format!(
                        "length mismatch: need {n} bytes for {what}, {} left",
                        self.bytes.len() - self.pos
                    ),
                )
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let at = self.pos;
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(Error::format(
                at,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn tensor(&mut self) -> Result<Tensor> {
        self.magic(TENSOR_MAGIC)?;
        let ndim_at = self.pos;
        let ndim = self.u32("ndim")?;
        if ndim > MAX_NDIM {
            return Err(Error::format(
                ndim_at,
                format!("ndim {ndim} exceeds {MAX_NDIM}"),
            ));
        }
        let dims_at = self.pos;
        let dims = (0..ndim)
            .map(|_| self.u32("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = element_count(&dims)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::format(dims_at, format!("dims {dims:?} overflow")))?;
        let payload = self.take(count, "payload")?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Tensor { dims, data })
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::decode(&std::fs::read(path)?)
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, tensor.encode())?;
    Ok(())
}

/// Reads a `PXF1` file as an image plane.
pub fn read_plane(path: impl AsRef<Path>) -> Result<ImagePlane> {
    ImagePlane::try_from(read_tensor(path)?)
}

pub fn write_plane(plane: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    write_tensor(&Tensor::from(plane), path)
}

/// An ordered list of named tensors, stored as `PXW1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    records: Vec<(String, Tensor)>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. Names must be unique.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::contract(format!("duplicate record name {name:?}")));
        }
        self.records.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(n, _)| n.as_str())
    }

    pub fn records(&self) -> &[(String, Tensor)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, tensor) in &self.records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            tensor.encode_into(&mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        cursor.magic(BUNDLE_MAGIC)?;
        let count = cursor.u32("record count")?;
        let mut bundle = Bundle::new();
        for _ in 0..count {
            let name_len = cursor.u32("name length")? as usize;
            let name_at = cursor.pos;
            let name = std::str::from_utf8(cursor.take(name_len, "record name")?)
                .map_err(|_| Error::format(name_at, "record name is not UTF-8"))?
                .to_owned();
            let tensor = cursor.tensor()?;
            if bundle.get(&name).is_some() {
                return Err(Error::format(name_at, format!("duplicate record {name:?}")));
            }
            bundle.records.push((name, tensor));
        }
        if cursor.pos != bytes.len() {
            return Err(Error::format(
                cursor.pos,
                "trailing bytes after last record",
            ));
        }
        Ok(bundle)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }
}
