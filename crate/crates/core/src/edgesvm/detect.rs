//! Edge maps from a trained model, averaged over two resolutions.

use super::{score_field, EdgeModel};
use crate::convnet::{preprocess, NetSpec, WeightBundle};
use crate::densefeat::{feature_dim, per_pixel_features, PixelFeatureField};
use crate::error::{Error, Result};
use crate::image::{resize_bilinear, ImagePlane};

/// Anything that turns an image into a same-sized one-channel edge map.
pub trait EdgeScorer {
    fn score(&self, image: &ImagePlane) -> Result<ImagePlane>;
}

impl<F> EdgeScorer for F
where
    F: Fn(&ImagePlane) -> Result<ImagePlane>,
{
    fn score(&self, image: &ImagePlane) -> Result<ImagePlane> {
        self(image)
    }
}

fn check_map(map: &ImagePlane, h: usize, w: usize) -> Result<()> {
    if map.dims() != (h, w, 1) {
        return Err(Error::shape(format!(
            "scorer returned {:?} for a {h}x{w} image",
            map.dims()
        )));
    }
    Ok(())
}

/// Mean of the edge maps computed at each of `scales`, every map resized
/// bilinearly back to the input size.
pub fn detect_scales(
    scorer: &impl EdgeScorer,
    image: &ImagePlane,
    scales: &[f64],
) -> Result<ImagePlane> {
    if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::contract("scales must be positive and non-empty"));
    }
    let (h, w) = (image.height(), image.width());
    let mut sum = ImagePlane::zeros(h, w, 1);
    for &s in scales {
        let (sh, sw) = (
            ((h as f64 * s).round() as usize).max(1),
            ((w as f64 * s).round() as usize).max(1),
        );
        let map = scorer.score(&resize_bilinear(image, sh, sw)?)?;
        check_map(&map, sh, sw)?;
        let back = resize_bilinear(&map, h, w)?;
        for (o, &v) in sum.data_mut().iter_mut().zip(back.data()) {
            *o += v;
        }
    }
    let n = scales.len() as f32;
    for v in sum.data_mut() {
        *v /= n;
    }
    Ok(sum)
}

/// `0.5 · score(image) + 0.5 · down(score(up(image)))`, where `up` doubles
/// both dimensions and `down` restores them, both bilinear.
pub fn detect_dual(scorer: &impl EdgeScorer, image: &ImagePlane) -> Result<ImagePlane> {
    detect_scales(scorer, image, &[1.0, 2.0])
}

/// Single-resolution descriptors of a raw image: mean subtraction, input
/// scaling, then the selected taps.
pub fn image_features(
    image: &ImagePlane,
    net: &NetSpec,
    weights: &WeightBundle,
    taps: &[String],
    channel_mean: &[f32],
) -> Result<PixelFeatureField> {
    let input = preprocess(image, channel_mean, net.input_scale)?;
    per_pixel_features(&input, net, weights, taps, &[1.0])
}

/// Scores an image with a convnet feature extractor and a linear model.
pub struct FeatureScorer<'a> {
    pub net: &'a NetSpec,
    pub weights: &'a WeightBundle,
    pub model: &'a EdgeModel,
}

impl<'a> FeatureScorer<'a> {
    pub fn new(net: &'a NetSpec, weights: &'a WeightBundle, model: &'a EdgeModel) -> Result<Self> {
        let dim = feature_dim(net, &model.taps, 1)?;
        if dim != model.svm.dim() {
            return Err(Error::contract(format!(
                "model expects {} features, net and taps produce {dim}",
                model.svm.dim()
            )));
        }
        if model.channel_mean.len() != net.input_channels {
            return Err(Error::shape(format!(
                "model stores a {}-channel mean, net takes {} channels",
                model.channel_mean.len(),
                net.input_channels
            )));
        }
        Ok(Self {
            net,
            weights,
            model,
        })
    }

    pub fn features(&self, image: &ImagePlane) -> Result<PixelFeatureField> {
        image_features(
            image,
            self.net,
            self.weights,
            &self.model.taps,
            &self.model.channel_mean,
        )
    }
}

impl EdgeScorer for FeatureScorer<'_> {
    fn score(&self, image: &ImagePlane) -> Result<ImagePlane> {
        score_field(&self.features(image)?, &self.model.svm)
    }
}

/// Full detection of one image at the original and doubled resolutions.
pub fn detect(
    image: &ImagePlane,
    net: &NetSpec,
    weights: &WeightBundle,
    model: &EdgeModel,
) -> Result<ImagePlane> {
    detect_dual(&FeatureScorer::new(net, weights, model)?, image)
}
