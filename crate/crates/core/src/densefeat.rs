//! Multiscale dense features: pyramid → stitched plane → one forward pass →
//! unstitched per-scale maps → per-pixel descriptors at image resolution.
//!
//! Descriptors are concatenated tap-major, scale-minor: for taps `[A, B]`
//! and scales `[1, 2]` the layout is `A@1, A@2, B@1, B@2`.

use crate::convnet::{forward_selected, NetSpec, WeightBundle};
use crate::error::{Error, Result};
use crate::image::{resize_bilinear, ImagePlane};

/// One tile of a stitched plane, in stitched-plane pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Placement {
    /// The tile's footprint in a map of the given stride. Offsets must be
    /// multiples of the stride; extents round up.
    pub fn at_stride(&self, stride: usize) -> Result<Placement> {
        if stride == 0 || !self.top.is_multiple_of(stride) || !self.left.is_multiple_of(stride) {
            return Err(Error::shape(format!(
                "tile offset ({}, {}) is not aligned to stride {stride}",
                self.top, self.left
            )));
        }
        Ok(Placement {
            top: self.top / stride,
            left: self.left / stride,
            height: self.height.div_ceil(stride),
            width: self.width.div_ceil(stride),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PyramidLayout {
    /// Scale factor of each tile; empty when the planes were not built by
    /// [`build_pyramid`].
    pub scales: Vec<f64>,
    /// Placement of each input plane, in input order.
    pub placements: Vec<Placement>,
    pub gutter: usize,
    /// Every tile offset is a multiple of this.
    pub align: usize,
    pub stitched_dims: (usize, usize),
}

/// Resamples the image once per scale to `round(s·H) × round(s·W)`.
pub fn build_pyramid(image: &ImagePlane, scales: &[f64]) -> Result<Vec<ImagePlane>> {
    if scales.is_empty() {
        return Err(Error::contract("at least one pyramid scale is required"));
    }
    scales
        .iter()
        .map(|&s| {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::contract(format!(
                    "pyramid scale {s} must be positive"
                )));
            }
            let h = (s * image.height() as f64).round() as usize;
            let w = (s * image.width() as f64).round() as usize;
            if h == 0 || w == 0 {
                return Err(Error::contract(format!(
                    "scale {s} shrinks {}x{} to nothing",
                    image.height(),
                    image.width()
                )));
            }
            resize_bilinear(image, h, w)
        })
        .collect()
}

fn round_up(v: usize, align: usize) -> usize {
    v.div_ceil(align) * align
}

/// Shelf-packs planes into one zero-filled plane with `gutter` pixels
/// between tiles.
pub fn stitch(planes: &[ImagePlane], gutter: usize) -> Result<(ImagePlane, PyramidLayout)> {
    stitch_aligned(planes, gutter, 1)
}

/// [`stitch`] with every tile offset rounded up to a multiple of `align`.
///
/// Tiles are placed left to right in order of descending height; a new shelf
/// starts when the next tile would cross the row width limit, which is the
/// larger of the widest tile and the side of a square holding all tiles with
/// their gutters.
pub fn stitch_aligned(
    planes: &[ImagePlane],
    gutter: usize,
    align: usize,
) -> Result<(ImagePlane, PyramidLayout)> {
    let first = planes
        .first()
        .ok_or_else(|| Error::contract("nothing to stitch"))?;
    let channels = first.channels();
    if planes.iter().any(|p| p.channels() != channels) {
        return Err(Error::contract(
            "stitched planes must share a channel count",
        ));
    }
    let align = align.max(1);

    let widest = planes.iter().map(|p| p.width()).max().unwrap_or(0);
    let area: usize = planes
        .iter()
        .map(|p| (p.height() + gutter) * (p.width() + gutter))
        .sum();
    let limit = widest.max((area as f64).sqrt().ceil() as usize);

    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(planes[i].height()));

    let mut placements = vec![
        Placement {
            top: 0,
            left: 0,
            height: 0,
            width: 0
        };
        planes.len()
    ];
    let (mut shelf_top, mut shelf_height, mut cursor) = (0usize, 0usize, 0usize);
    let mut first_on_shelf = true;
    for &i in &order {
        let (h, w) = (planes[i].height(), planes[i].width());
        let mut left = if first_on_shelf {
            0
        } else {
            round_up(cursor + gutter, align)
        };
        if !first_on_shelf && left + w > limit {
            shelf_top = round_up(shelf_top + shelf_height + gutter, align);
            shelf_height = 0;
            left = 0;
        }
        placements[i] = Placement {
            top: shelf_top,
            left,
            height: h,
            width: w,
        };
        cursor = left + w;
        shelf_height = shelf_height.max(h);
        first_on_shelf = false;
    }

    let height = placements
        .iter()
        .map(|p| p.top + p.height)
        .max()
        .unwrap_or(0);
    let width = placements
        .iter()
        .map(|p| p.left + p.width)
        .max()
        .unwrap_or(0);
    let mut stitched = ImagePlane::zeros(height, width, channels);
    for (plane, p) in planes.iter().zip(&placements) {
        let row_len = p.width * channels;
        for y in 0..p.height {
            let dst = stitched.index(p.top + y, p.left, 0);
            let src = plane.index(y, 0, 0);
            stitched.data_mut()[dst..dst + row_len]
                .copy_from_slice(&plane.data()[src..src + row_len]);
        }
    }
    Ok((
        stitched,
        PyramidLayout {
            scales: Vec::new(),
            placements,
            gutter,
            align,
            stitched_dims: (height, width),
        },
    ))
}

/// Crops each tile's descriptors out of a map computed on the stitched plane
/// at cumulative stride `tap_stride`.
pub fn unstitch(
    feature_plane: &ImagePlane,
    layout: &PyramidLayout,
    tap_stride: usize,
) -> Result<Vec<ImagePlane>> {
    if tap_stride == 0 {
        return Err(Error::shape("tap stride must be positive"));
    }
    let (h, w) = layout.stitched_dims;
    let expected = (h.div_ceil(tap_stride), w.div_ceil(tap_stride));
    if (feature_plane.height(), feature_plane.width()) != expected {
        return Err(Error::shape(format!(
            "stride-{tap_stride} map of a {h}x{w} layout should be {}x{}, got {}x{}",
            expected.0,
            expected.1,
            feature_plane.height(),
            feature_plane.width()
        )));
    }
    layout
        .placements
        .iter()
        .map(|p| {
            let q = p.at_stride(tap_stride)?;
            feature_plane.crop(q.top, q.left, q.height, q.width)
        })
        .collect()
}

/// An `H×W×D` field holding one descriptor per image pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelFeatureField {
    plane: ImagePlane,
}

impl PixelFeatureField {
    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn dim(&self) -> usize {
        self.plane.channels()
    }

    pub fn descriptor(&self, y: usize, x: usize) -> &[f32] {
        self.plane.pixel(y, x)
    }

    pub fn as_plane(&self) -> &ImagePlane {
        &self.plane
    }

    pub fn into_plane(self) -> ImagePlane {
        self.plane
    }
}

impl From<ImagePlane> for PixelFeatureField {
    fn from(plane: ImagePlane) -> Self {
        Self { plane }
    }
}

/// Descriptor dimension produced by [`per_pixel_features`].
pub fn feature_dim(net: &NetSpec, taps: &[String], scales: usize) -> Result<usize> {
    taps.iter()
        .map(|t| net.tap_channels(t))
        .sum::<Result<usize>>()
        .map(|d| d * scales)
}

/// Per-pixel descriptors for a preprocessed image.
///
/// Every scale of the pyramid is stitched into one plane (aligned to the
/// net's coarsest stride and separated by [`NetSpec::default_gutter`]), the
/// net runs once, and each tap's per-scale map is bilinearly rescaled to the
/// image size.
pub fn per_pixel_features(
    image: &ImagePlane,
    net: &NetSpec,
    weights: &WeightBundle,
    taps: &[String],
    scales: &[f64],
) -> Result<PixelFeatureField> {
    if taps.is_empty() {
        return Err(Error::contract("tap selection is empty"));
    }
    let pyramid = build_pyramid(image, scales)?;
    let last = net.last_layer_for(taps)?;
    let (gutter, align) = if pyramid.len() == 1 {
        (0, 1)
    } else {
        (net.default_gutter(taps)?, net.max_stride(last))
    };
    let (stitched, mut layout) = stitch_aligned(&pyramid, gutter, align)?;
    layout.scales = scales.to_vec();

    let outputs = forward_selected(&stitched, net, weights, taps)?;
    let (h, w) = (image.height(), image.width());
    let mut parts = Vec::with_capacity(outputs.len() * pyramid.len());
    for out in &outputs {
        for tile in unstitch(&out.map, &layout, out.stride)? {
            parts.push(resize_bilinear(&tile, h, w)?);
        }
    }
    Ok(PixelFeatureField {
        plane: ImagePlane::concat_channels(&parts)?,
    })
}
