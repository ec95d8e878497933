//! Orientation-aware non-maximal suppression of soft edge maps.
//!
//! Orientations are estimated from the smoothed gradient of the edge map
//! itself; a pixel survives when it is at least as strong as both
//! interpolated neighbours one pixel away along the edge normal.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::image::ImagePlane;

pub const DEFAULT_SIGMA: f64 = 2.0;

/// Per-pixel edge direction in `[0, π)`, normal to the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationField {
    height: usize,
    width: usize,
    theta: Vec<f64>,
}

impl OrientationField {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.theta[y * self.width + x]
    }

    /// A constant field, mostly for tests.
    pub fn uniform(height: usize, width: usize, theta: f64) -> Self {
        Self {
            height,
            width,
            theta: vec![theta.rem_euclid(PI); height * width],
        }
    }
}

/// Truncated (±3σ) Gaussian, renormalized to unit sum.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable blur with edge replication.
fn smooth(values: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * values[y * w + clamp(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Gaussian-smoothed central-difference gradients; `θ = atan2(gy, gx) + π/2 (mod π)`.
/// Pixels with no gradient get `θ = 0`.
pub fn estimate_orientation(edge_map: &ImagePlane, sigma: f64) -> Result<OrientationField> {
    if edge_map.channels() != 1 {
        return Err(Error::contract("orientation needs a one-channel map"));
    }
    let (h, w) = (edge_map.height(), edge_map.width());
    let values: Vec<f64> = edge_map.data().iter().map(|&v| v as f64).collect();
    let s = smooth(&values, h, w, &gaussian_kernel(sigma));
    let at = |y: usize, x: usize| s[y * w + x];
    let mut theta = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let gx = if xr > xl {
                (at(y, xr) - at(y, xl)) / (xr - xl) as f64
            } else {
                0.0
            };
            let gy = if yd > yu {
                (at(yd, x) - at(yu, x)) / (yd - yu) as f64
            } else {
                0.0
            };
            theta[y * w + x] = if gx == 0.0 && gy == 0.0 {
                0.0
            } else {
                (gy.atan2(gx) + FRAC_PI_2).rem_euclid(PI)
            };
        }
    }
    Ok(OrientationField {
        height: h,
        width: w,
        theta,
    })
}

/// Bilinear sample where taps outside the map read as zero.
fn sample(map: &ImagePlane, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let tap = |yy: f64, xx: f64| -> f64 {
        if yy < 0.0 || xx < 0.0 || yy >= map.height() as f64 || xx >= map.width() as f64 {
            0.0
        } else {
            map.get(yy as usize, xx as usize, 0) as f64
        }
    };
    let top = tap(y0, x0) * (1.0 - fx) + tap(y0, x0 + 1.0) * fx;
    let bottom = tap(y0 + 1.0, x0) * (1.0 - fx) + tap(y0 + 1.0, x0 + 1.0) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Zeroes every pixel that is weaker than either neighbour one unit away
/// along the normal to its edge direction. Ties are kept.
pub fn suppress(edge_map: &ImagePlane, orientation: &OrientationField) -> Result<ImagePlane> {
    if edge_map.channels() != 1
        || (edge_map.height(), edge_map.width()) != (orientation.height, orientation.width)
    {
        return Err(Error::shape(
            "edge map and orientation field differ in size",
        ));
    }
    let mut out = edge_map.clone();
    for y in 0..edge_map.height() {
        for x in 0..edge_map.width() {
            let v = edge_map.get(y, x, 0) as f64;
            if v <= 0.0 {
                continue;
            }
            // unit normal to an edge running along (cos θ, sin θ)
            let theta = orientation.get(y, x);
            let (ny, nx) = (theta.cos(), -theta.sin());
            let ahead = sample(edge_map, y as f64 + ny, x as f64 + nx);
            let behind = sample(edge_map, y as f64 - ny, x as f64 - nx);
            if v < ahead || v < behind {
                out.set(y, x, 0, 0.0);
            }
        }
    }
    Ok(out)
}

/// [`estimate_orientation`] followed by [`suppress`].
pub fn thin_edges(edge_map: &ImagePlane, sigma: f64) -> Result<ImagePlane> {
    suppress(edge_map, &estimate_orientation(edge_map, sigma)?)
}
