//! Convolution parameters and the `PXW1` weight-bundle loader.
//!
//! A bundle holds, for every conv layer `L` of a [`NetSpec`], a record
//! `L.weight` of shape `out × in × k × k` and a record `L.bias` of shape `out`.

use std::f32::consts::PI;
use std::path::Path;

use rand_distr::{Distribution, Normal};

use super::spec::{ConvShape, NetSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Bundle, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights {
    out_channels: usize,
    /// Per group.
    in_channels: usize,
    kernel: usize,
    groups: usize,
    /// `(o, c, ky, kx)` as stored on disk.
    weights: Vec<f32>,
    bias: Vec<f32>,
    /// `(o, ky, kx, c)` so the inner loop walks a pixel's channels.
    taps: Vec<f32>,
}

impl ConvWeights {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        Self::grouped(out_channels, in_channels, kernel, 1, weights, bias)
    }

    /// Filters of group `g` (outputs `g·out/groups ..`) see only input
    /// channels `g·in_channels .. (g+1)·in_channels`.
    pub fn grouped(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        groups: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel == 0 || groups == 0 {
            return Err(Error::shape("conv weight dims must be positive"));
        }
        if !out_channels.is_multiple_of(groups) {
            return Err(Error::shape(format!(
                "{groups} groups do not divide {out_channels} outputs"
            )));
        }
        let n = out_channels * in_channels * kernel * kernel;
        if weights.len() != n || bias.len() != out_channels {
            return Err(Error::shape(format!(
                "conv {out_channels}x{in_channels}x{kernel}x{kernel} needs {n} weights and \
                 {out_channels} biases, got {} and {}",
                weights.len(),
                bias.len()
            )));
        }
        let mut taps = vec![0.0; n];
        for o in 0..out_channels {
            for c in 0..in_channels {
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        taps[((o * kernel + ky) * kernel + kx) * in_channels + c] =
                            weights[((o * in_channels + c) * kernel + ky) * kernel + kx];
                    }
                }
            }
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            groups,
            weights,
            bias,
            taps,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Weights in `(o, c, ky, kx)` order.
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn weight(&self, o: usize, c: usize, ky: usize, kx: usize) -> f32 {
        self.weights[((o * self.in_channels + c) * self.kernel + ky) * self.kernel + kx]
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub(crate) fn taps(&self) -> &[f32] {
        &self.taps
    }
}

/// Parameters for every conv layer of one [`NetSpec`], in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBundle {
    layers: Vec<(String, ConvWeights)>,
}

impl WeightBundle {
    pub fn get(&self, layer: &str) -> Option<&ConvWeights> {
        self.layers.iter().find(|(n, _)| n == layer).map(|(_, w)| w)
    }

    /// Checks every record against the net; missing, extra or misshapen
    /// records are errors.
    pub fn from_bundle(bundle: &Bundle, net: &NetSpec) -> Result<Self> {
        let shapes = net.conv_shapes();
        let mut layers = Vec::with_capacity(shapes.len());
        for shape in &shapes {
            let weight = record(bundle, &format!("{}.weight", shape.name))?;
            let bias = record(bundle, &format!("{}.bias", shape.name))?;
            let k = shape.kernel;
            if weight.dims() != [shape.out_channels, shape.in_channels, k, k] {
                return Err(Error::shape(format!(
                    "{}.weight has dims {:?}, net expects [{}, {}, {k}, {k}]",
                    shape.name,
                    weight.dims(),
                    shape.out_channels,
                    shape.in_channels
                )));
            }
            if bias.dims() != [shape.out_channels] {
                return Err(Error::shape(format!(
                    "{}.bias has dims {:?}, net expects [{}]",
                    shape.name,
                    bias.dims(),
                    shape.out_channels
                )));
            }
            layers.push((
                shape.name.clone(),
                ConvWeights::grouped(
                    shape.out_channels,
                    shape.in_channels,
                    k,
                    shape.groups,
                    weight.data().to_vec(),
                    bias.data().to_vec(),
                )?,
            ));
        }
        if let Some(extra) = bundle.names().find(|n| {
            !shapes
                .iter()
                .any(|s| *n == format!("{}.weight", s.name) || *n == format!("{}.bias", s.name))
        }) {
            return Err(Error::shape(format!(
                "record {extra:?} matches no conv layer"
            )));
        }
        Ok(Self { layers })
    }

    pub fn to_bundle(&self) -> Bundle {
        let mut bundle = Bundle::new();
        for (name, w) in &self.layers {
            let k = w.kernel;
            bundle
                .push(
                    format!("{name}.weight"),
                    Tensor::new(vec![w.out_channels, w.in_channels, k, k], w.weights.clone())
                        .expect("weight dims consistent"),
                )
                .expect("unique layer names");
            bundle
                .push(format!("{name}.bias"), Tensor::vector(w.bias.clone()))
                .expect("unique layer names");
        }
        bundle
    }

    pub fn read(path: impl AsRef<Path>, net: &NetSpec) -> Result<Self> {
        Self::from_bundle(&Bundle::read(path)?, net)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_bundle().write(path)
    }

    /// He-normal weights and zero biases, drawn from a seeded stream.
    pub fn random(net: &NetSpec, seed: u64) -> Self {
        let layers = net
            .conv_shapes()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), random_conv(s, seed, i as u64)))
            .collect();
        Self { layers }
    }

    /// First conv layer: oriented first-derivative-of-Gaussian filters on
    /// luminance, in ± polarity pairs. Later layers are seeded He-normal.
    pub fn filter_bank(net: &NetSpec, seed: u64) -> Self {
        let layers = net
            .conv_shapes()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let w = if i == 0 {
                    derivative_bank(s)
                } else {
                    random_conv(s, seed, i as u64)
                };
                (s.name.clone(), w)
            })
            .collect();
        Self { layers }
    }

    /// Resolves `random`, `filterbank`, or a path to a `PXW1` file.
    pub fn resolve(name_or_path: &str, net: &NetSpec, seed: u64) -> Result<Self> {
        match name_or_path {
            "random" => Ok(Self::random(net, seed)),
            "filterbank" => Ok(Self::filter_bank(net, seed)),
            path => Self::read(path, net),
        }
    }
}

fn record<'a>(bundle: &'a Bundle, name: &str) -> Result<&'a Tensor> {
    bundle
        .get(name)
        .ok_or_else(|| Error::shape(format!("weight bundle lacks record {name:?}")))
}

fn random_conv(shape: &ConvShape, seed: u64, index: u64) -> ConvWeights {
    let fan_in = (shape.in_channels * shape.kernel * shape.kernel) as f32;
    let normal = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).expect("finite std");
    let mut rng = rng::stream(seed, "weights", index);
    let n = shape.out_channels * shape.in_channels * shape.kernel * shape.kernel;
    let weights = (0..n).map(|_| normal.sample(&mut rng)).collect();
    ConvWeights::grouped(
        shape.out_channels,
        shape.in_channels,
        shape.kernel,
        shape.groups,
        weights,
        vec![0.0; shape.out_channels],
    )
    .expect("generated dims consistent")
}

fn derivative_bank(shape: &ConvShape) -> ConvWeights {
    let k = shape.kernel;
    let c = shape.in_channels;
    let pairs = shape.out_channels.div_ceil(2);
    let sigma = (k as f32 / 5.0).max(0.5);
    let center = (k as f32 - 1.0) / 2.0;
    let mut weights = Vec::with_capacity(shape.out_channels * c * k * k);
    for o in 0..shape.out_channels {
        let theta = (o / 2) as f32 * PI / pairs as f32;
        let sign = if o % 2 == 0 { 1.0 } else { -1.0 };
        let (sin, cos) = theta.sin_cos();
        let mut kernel: Vec<f32> = (0..k * k)
            .map(|i| {
                let y = (i / k) as f32 - center;
                let x = (i % k) as f32 - center;
                let u = x * cos + y * sin;
                u * (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let l1: f32 = kernel.iter().map(|v| v.abs()).sum();
        if l1 > 0.0 {
            kernel.iter_mut().for_each(|v| *v *= sign / (l1 * c as f32));
        }
        for _ in 0..c {
            weights.extend_from_slice(&kernel);
        }
    }
    ConvWeights::grouped(
        shape.out_channels,
        c,
        k,
        shape.groups,
        weights,
        vec![0.0; shape.out_channels],
    )
    .expect("generated dims consistent")
}
