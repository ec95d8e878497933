//! The [`ImagePlane`] value type and bilinear resampling.
//!
//! A plane is an `H×W×C` array of `f32` in row-major `(row, column, channel)`
//! order. The same type carries input images, activation maps, per-pixel
//! feature fields and soft edge maps.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "plane dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::shape("plane dims overflow"))?;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "plane {height}x{width}x{channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        assert!(
            height > 0 && width > 0 && channels > 0,
            "plane dims must be positive"
        );
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// Builds a plane by evaluating `f(row, col, channel)` everywhere.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut plane = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    plane.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        plane
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    /// The `channels`-long descriptor stored at one pixel.
    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [f32] {
        let start = (y * self.width + x) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Extracts a single channel as a one-channel plane.
    pub fn channel(&self, c: usize) -> ImagePlane {
        assert!(c < self.channels);
        let data = self
            .data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        ImagePlane {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Copies the `h×w` window starting at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, h: usize, w: usize) -> Result<ImagePlane> {
        if h == 0 || w == 0 || top + h > self.height || left + w > self.width {
            return Err(Error::shape(format!(
                "crop {h}x{w}@({top},{left}) outside {}x{} plane",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w * self.channels);
        for y in top..top + h {
            let start = self.index(y, left, 0);
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        ImagePlane::new(h, w, self.channels, data)
    }

    /// Concatenates planes of identical spatial size along the channel axis.
    pub fn concat_channels(planes: &[ImagePlane]) -> Result<ImagePlane> {
        let first = planes
            .first()
            .ok_or_else(|| Error::contract("cannot concatenate zero planes"))?;
        let (h, w) = (first.height, first.width);
        if let Some(p) = planes.iter().find(|p| p.height != h || p.width != w) {
            return Err(Error::shape(format!(
                "cannot concatenate {}x{} with {h}x{w}",
                p.height, p.width
            )));
        }
        let total: usize = planes.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(h * w * total);
        for i in 0..h * w {
            for p in planes {
                data.extend_from_slice(&p.data[i * p.channels..(i + 1) * p.channels]);
            }
        }
        ImagePlane::new(h, w, total, data)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> ImagePlane {
        ImagePlane {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }
}

/// Source coordinate of output index `i` under the align-corners convention.
#[inline]
fn align_corners_coord(i: usize, input: usize, output: usize) -> f64 {
    if output > 1 {
        i as f64 * (input - 1) as f64 / (output - 1) as f64
    } else {
        0.0
    }
}

/// Per-channel bilinear resampling with aligned corners.
///
/// Output index `i` samples source coordinate `i·(in−1)/(out−1)` (or 0 when
/// `out == 1`), so corner pixels map exactly onto corner pixels.
pub fn resize_bilinear(plane: &ImagePlane, out_h: usize, out_w: usize) -> Result<ImagePlane> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::contract(format!(
            "resize target must be at least 1x1, got {out_h}x{out_w}"
        )));
    }
    let (in_h, in_w, c) = plane.dims();
    if in_h == out_h && in_w == out_w {
        return Ok(plane.clone());
    }

    let taps = |input: usize, output: usize| -> Vec<(usize, usize, f32)> {
        (0..output)
            .map(|i| {
                let s = align_corners_coord(i, input, output);
                let i0 = (s.floor() as usize).min(input - 1);
                let i1 = (i0 + 1).min(input - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let rows = taps(in_h, out_h);
    let cols = taps(in_w, out_w);

    let mut out = ImagePlane::zeros(out_h, out_w, c);
    for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
        for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
            let dst = out.index(y, x, 0);
            for ch in 0..c {
                let v00 = plane.get(y0, x0, ch);
                let v01 = plane.get(y0, x1, ch);
                let v10 = plane.get(y1, x0, ch);
                let v11 = plane.get(y1, x1, ch);
                let top = v00 + (v01 - v00) * fx;
                let bottom = v10 + (v11 - v10) * fx;
                let v = top + (bottom - top) * fy;
                // rounding can step one ulp outside the hull of the four taps
                let lo = v00.min(v01).min(v10).min(v11);
                let hi = v00.max(v01).max(v10).max(v11);
                out.data[dst + ch] = v.clamp(lo, hi);
            }
        }
    }
    Ok(out)
}
