//! From-scratch forward pass of an AlexNet-shaped feature extractor.
//!
//! The net is described by a [`NetSpec`], parameterized by a
//! [`WeightBundle`], and evaluated by [`forward_taps`], which returns the
//! activation map at each tap together with its cumulative stride.

mod layers;
mod spec;
mod weights;

pub use layers::{conv_forward, lrn, maxpool, relu};
pub use spec::{ConvShape, Layer, LayerSpec, NetSpec, Tap};
pub use weights::{ConvWeights, WeightBundle};

use crate::error::{Error, Result};
use crate::image::ImagePlane;

#[derive(Clone, Debug, PartialEq)]
pub struct TapOutput {
    pub name: String,
    pub map: ImagePlane,
    pub stride: usize,
}

/// Applies one layer.
pub fn apply_layer(
    input: &ImagePlane,
    layer: &Layer,
    weights: &WeightBundle,
) -> Result<ImagePlane> {
    match layer.spec {
        LayerSpec::Conv { stride, pad, .. } => {
            let w = weights
                .get(&layer.name)
                .ok_or_else(|| Error::shape(format!("no weights for layer {}", layer.name)))?;
            conv_forward(input, w, stride, pad)
        }
        LayerSpec::Relu => Ok(relu(input)),
        LayerSpec::MaxPool {
            kernel,
            stride,
            pad,
        } => maxpool(input, kernel, stride, pad),
        LayerSpec::Lrn {
            depth_radius,
            alpha,
            beta,
            bias,
        } => Ok(lrn(input, depth_radius, alpha, beta, bias)),
    }
}

/// Runs the whole net and returns every tap in declaration order.
pub fn forward_taps(
    image: &ImagePlane,
    net: &NetSpec,
    weights: &WeightBundle,
) -> Result<Vec<TapOutput>> {
    forward_selected(image, net, weights, &net.tap_names())
}

/// Runs the net only as deep as the deepest requested tap and returns the
/// requested taps in the order given.
pub fn forward_selected(
    image: &ImagePlane,
    net: &NetSpec,
    weights: &WeightBundle,
    taps: &[String],
) -> Result<Vec<TapOutput>> {
    if image.channels() != net.input_channels {
        return Err(Error::shape(format!(
            "net expects {} input channels, got {}",
            net.input_channels,
            image.channels()
        )));
    }
    let last = net.last_layer_for(taps)?;
    let mut captured: Vec<Option<ImagePlane>> = vec![None; taps.len()];
    let mut current = image.clone();
    for (i, layer) in net.layers[..=last].iter().enumerate() {
        current = apply_layer(&current, layer, weights)?;
        for (slot, name) in captured.iter_mut().zip(taps) {
            if net.tap(name)?.after == i {
                *slot = Some(current.clone());
            }
        }
    }
    taps.iter()
        .zip(captured)
        .map(|(name, map)| {
            Ok(TapOutput {
                name: name.clone(),
                map: map.expect("every tap lies at or before the last layer"),
                stride: net.tap_stride(name)?,
            })
        })
        .collect()
}

/// Per-channel mean over a set of images.
pub fn channel_mean<'a>(images: impl IntoIterator<Item = &'a ImagePlane>) -> Result<Vec<f32>> {
    let mut sums: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for img in images {
        if sums.is_empty() {
            sums = vec![0.0; img.channels()];
        } else if sums.len() != img.channels() {
            return Err(Error::shape("images differ in channel count"));
        }
        for px in img.data().chunks_exact(img.channels()) {
            for (s, &v) in sums.iter_mut().zip(px) {
                *s += v as f64;
            }
        }
        count += img.height() * img.width();
    }
    if count == 0 {
        return Err(Error::contract("mean of an empty image set"));
    }
    Ok(sums.iter().map(|s| (s / count as f64) as f32).collect())
}

/// Subtracts the per-channel mean and scales, producing net input.
pub fn preprocess(image: &ImagePlane, mean: &[f32], scale: f32) -> Result<ImagePlane> {
    if mean.len() != image.channels() {
        return Err(Error::shape(format!(
            "mean has {} channels, image has {}",
            mean.len(),
            image.channels()
        )));
    }
    let mut out = image.clone();
    let c = image.channels();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v = (*v - mean[i % c]) * scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_net() -> NetSpec {
        NetSpec::parse(
            "input_channels=3\nlayer name=c kind=conv out=4 kernel=3 pad=1\ntap name=T\n",
        )
        .unwrap()
    }

    #[test]
    fn toy_single_tap() {
        let net = toy_net();
        let w = WeightBundle::random(&net, 1);
        let taps = forward_taps(&ImagePlane::filled(8, 8, 3, 0.3), &net, &w).unwrap();
        assert_eq!(taps.len(), 1);
        assert_eq!(taps[0].map.dims(), (8, 8, 4));
        assert_eq!(taps[0].stride, 1);
    }

    #[test]
    fn alexnet_tap_geometry_on_64() {
        let net = NetSpec::alexnet();
        let w = WeightBundle::random(&net, 2);
        let img = ImagePlane::from_fn(64, 64, 3, |y, x, c| ((y + 2 * x + c) % 7) as f32 / 7.0);
        let taps = forward_taps(&img, &net, &w).unwrap();
        let got: Vec<_> = taps.iter().map(|t| (t.map.dims(), t.stride)).collect();
        assert_eq!(
            got,
            vec![
                ((16, 16, 96), 4),
                ((8, 8, 256), 8),
                ((4, 4, 384), 16),
                ((4, 4, 384), 16),
                ((4, 4, 256), 16)
            ]
        );
    }

    #[test]
    fn selected_taps_follow_request_order() {
        let net = NetSpec::desk();
        let w = WeightBundle::random(&net, 2);
        let img = ImagePlane::filled(16, 16, 3, 0.1);
        let taps =
            forward_selected(&img, &net, &w, &["Conv2".to_string(), "Conv1".to_string()]).unwrap();
        assert_eq!(taps[0].name, "Conv2");
        assert_eq!(taps[0].map.dims(), (8, 8, 32));
        assert_eq!(taps[1].map.dims(), (16, 16, 16));
        assert!(forward_selected(&img, &net, &w, &["Conv9".to_string()]).is_err());
    }

    #[test]
    fn wrong_input_channels() {
        let net = toy_net();
        let w = WeightBundle::random(&net, 1);
        assert!(matches!(
            forward_taps(&ImagePlane::zeros(8, 8, 1), &net, &w),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn preprocessing() {
        let img = ImagePlane::new(1, 2, 2, vec![0.5, 1.0, 0.25, 0.0]).unwrap();
        let mean = channel_mean([&img]).unwrap();
        assert_eq!(mean, vec![0.375, 0.5]);
        let p = preprocess(&img, &mean, 2.0).unwrap();
        assert_eq!(p.data(), &[0.25, 1.0, -0.25, -1.0]);
    }
}
