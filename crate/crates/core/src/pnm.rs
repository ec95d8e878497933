//! Binary Netpbm I/O: P5 (gray) and P6 (RGB) at maxval 255 or 65535.
//!
//! Samples are normalized to `[0, 1]` on read. 16-bit samples are big-endian.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Maxval {
    Eight,
    Sixteen,
}

impl Maxval {
    pub fn value(self) -> u32 {
        match self {
            Maxval::Eight => 255,
            Maxval::Sixteen => 65535,
        }
    }

    fn bytes_per_sample(self) -> usize {
        match self {
            Maxval::Eight => 1,
            Maxval::Sixteen => 2,
        }
    }
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: Maxval,
    payload_offset: usize,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::format(0, "expected magic P5 or P6")),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    reader.skip_whitespace_and_comments();
    let maxval_offset = reader.pos;
    let maxval = match reader.number("maxval")? {
        255 => Maxval::Eight,
        65535 => Maxval::Sixteen,
        other => {
            return Err(Error::format(
                maxval_offset,
                format!("unsupported maxval {other}"),
            ))
        }
    };
    if width == 0 || height == 0 {
        return Err(Error::format(2, "zero image dimension"));
    }
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => {
            return Err(Error::format(
                reader.pos,
                "expected single whitespace before raster",
            ))
        }
    }
    Ok(Header {
        channels,
        width,
        height,
        maxval,
        payload_offset: reader.pos + 1,
    })
}

/// Decodes an in-memory P5/P6 file.
pub fn decode_image(bytes: &[u8]) -> Result<ImagePlane> {
    let header = parse_header(bytes)?;
    let samples = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.channels))
        .ok_or_else(|| Error::format(2, "image dimensions overflow"))?;
    let bps = header.maxval.bytes_per_sample();
    let payload = &bytes[header.payload_offset..];
    let needed = samples * bps;
    if payload.len() < needed {
        return Err(Error::format(
            bytes.len(),
            format!(
                "truncated raster: need {needed} bytes after offset {}, found {}",
                header.payload_offset,
                payload.len()
            ),
        ));
    }
    let scale = header.maxval.value() as f32;
    let data = match header.maxval {
        Maxval::Eight => payload[..needed]
            .iter()
            .map(|&b| b as f32 / scale)
            .collect(),
        Maxval::Sixteen => payload[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / scale)
            .collect(),
    };
    ImagePlane::new(header.height, header.width, header.channels, data)
}

/// Reads a binary PGM or PPM file into a plane with values in `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImagePlane> {
    decode_image(&std::fs::read(path)?)
}

/// Encodes a 1- or 3-channel plane. Values must lie in `[0, 1]`; each is
/// stored as `round(v × maxval)` with halves rounded up.
pub fn encode_image(plane: &ImagePlane, maxval: Maxval) -> Result<Vec<u8>> {
    let magic = match plane.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(Error::contract(format!(
                "netpbm output needs 1 or 3 channels, got {c}"
            )))
        }
    };
    let scale = maxval.value() as f64;
    let mut out = format!(
        "{magic}\n{} {}\n{}\n",
        plane.width(),
        plane.height(),
        maxval.value()
    )
    .into_bytes();
    out.reserve(plane.data().len() * maxval.bytes_per_sample());
    for (i, &v) in plane.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!(
                "sample {i} has value {v} outside [0, 1]"
            )));
        }
        let q = (v as f64 * scale + 0.5).floor() as u32;
        match maxval {
            Maxval::Eight => out.push(q as u8),
            Maxval::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    Ok(out)
}

pub fn write_image(plane: &ImagePlane, path: impl AsRef<Path>, maxval: Maxval) -> Result<()> {
    let bytes = encode_image(plane, maxval)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Writes a single-channel soft edge map as a 16-bit PGM.
pub fn write_edge_map(plane: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    if plane.channels() != 1 {
        return Err(Error::contract(format!(
            "edge map must have one channel, got {}",
            plane.channels()
        )));
    }
    write_image(plane, path, Maxval::Sixteen)
}
