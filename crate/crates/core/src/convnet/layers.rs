//! Forward kernels for the four layer kinds.

use rayon::prelude::*;

use super::weights::ConvWeights;
use crate::error::{Error, Result};
use crate::image::ImagePlane;

fn output_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::shape(format!(
            "window {kernel} does not fit input {input} with pad {pad}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Zero-padded cross-correlation (no kernel flip).
///
/// `out(y, x, o) = bias(o) + Σ_{c, ky, kx} in(y·s + ky − p, x·s + kx − p, g·C + c) · k(o, c, ky, kx)`
/// where `g` is the group of output `o` and `C` the per-group input width.
pub fn conv_forward(
    input: &ImagePlane,
    weights: &ConvWeights,
    stride: usize,
    pad: usize,
) -> Result<ImagePlane> {
    let (in_h, in_w, in_c) = input.dims();
    let groups = weights.groups();
    let cg = weights.in_channels();
    if in_c != cg * groups {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {in_c}",
            cg * groups
        )));
    }
    if stride == 0 {
        return Err(Error::shape("conv stride must be at least 1"));
    }
    let k = weights.kernel();
    let out_c = weights.out_channels();
    let out_h = output_extent(in_h, k, stride, pad)?;
    let out_w = output_extent(in_w, k, stride, pad)?;
    let taps = weights.taps();
    let bias = weights.bias();
    let per_group = out_c / groups;

    let mut out = ImagePlane::zeros(out_h, out_w, out_c);
    out.data_mut()
        .par_chunks_mut(out_w * out_c)
        .enumerate()
        .for_each(|(oy, row)| {
            for ox in 0..out_w {
                let acc = &mut row[ox * out_c..(ox + 1) * out_c];
                acc.copy_from_slice(bias);
                for ky in 0..k {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        let px = input.pixel(iy as usize, ix as usize);
                        let base = (ky * k + kx) * cg;
                        for (o, a) in acc.iter_mut().enumerate() {
                            let g = o / per_group;
                            let w = &taps[o * k * k * cg + base..][..cg];
                            let p = &px[g * cg..(g + 1) * cg];
                            *a += p.iter().zip(w).map(|(p, w)| p * w).sum::<f32>();
                        }
                    }
                }
            }
        });
    Ok(out)
}

pub fn relu(input: &ImagePlane) -> ImagePlane {
    input.map(|v| v.max(0.0))
}

/// Per-channel window maximum. Windows are clipped to the input, which is
/// the same as padding with `-inf`.
pub fn maxpool(input: &ImagePlane, kernel: usize, stride: usize, pad: usize) -> Result<ImagePlane> {
    if kernel == 0 || stride == 0 || pad >= kernel {
        return Err(Error::shape(format!(
            "degenerate pooling kernel={kernel} stride={stride} pad={pad}"
        )));
    }
    let (in_h, in_w, c) = input.dims();
    let out_h = output_extent(in_h, kernel, stride, pad)?;
    let out_w = output_extent(in_w, kernel, stride, pad)?;
    let span = |o: usize, n: usize| {
        let start = (o * stride) as isize - pad as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + kernel as isize) as usize).min(n);
        lo..hi
    };
    let mut out = ImagePlane::filled(out_h, out_w, c, f32::NEG_INFINITY);
    for oy in 0..out_h {
        let rows = span(oy, in_h);
        for ox in 0..out_w {
            let cols = span(ox, in_w);
            if rows.is_empty() || cols.is_empty() {
                return Err(Error::shape("pooling window lies entirely in padding"));
            }
            for y in rows.clone() {
                for x in cols.clone() {
                    let src = input.pixel(y, x);
                    let dst = out.pixel_mut(oy, ox);
                    for (d, &s) in dst.iter_mut().zip(src) {
                        if s > *d {
                            *d = s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Local response normalization across channels.
pub fn lrn(
    input: &ImagePlane,
    depth_radius: usize,
    alpha: f32,
    beta: f32,
    bias: f32,
) -> ImagePlane {
    let (h, w, c) = input.dims();
    let mut out = input.clone();
    let mut squares = vec![0.0f32; c];
    for y in 0..h {
        for x in 0..w {
            let src = input.pixel(y, x);
            for (s, v) in squares.iter_mut().zip(src) {
                *s = v * v;
            }
            let dst = out.pixel_mut(y, x);
            for ch in 0..c {
                let lo = ch.saturating_sub(depth_radius);
                let hi = (ch + depth_radius + 1).min(c);
                let energy: f32 = squares[lo..hi].iter().sum();
                dst[ch] = src[ch] / (bias + alpha * energy).powf(beta);
            }
        }
    }
    out
}
