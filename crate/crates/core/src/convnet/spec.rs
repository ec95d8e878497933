//! Declarative network description and its plain-text `key=value` form.
//!
//! ```text
//! # comment
//! input_channels=3
//! input_scale=1
//! layer name=conv1 kind=conv out=96 kernel=11 stride=4 pad=5
//! layer kind=relu
//! layer kind=lrn radius=2 alpha=0.00002 beta=0.75 bias=1
//! tap name=Conv1
//! layer kind=maxpool kernel=3 stride=2 pad=1
//! ```
//!
//! A `tap` line marks the output of the layer directly above it.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    /// Channels split into `groups` independent slices, input and output alike.
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        groups: usize,
    },
    Relu,
    /// Windows overhanging the border by `pad` ignore the missing samples.
    MaxPool {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    /// `v / (bias + alpha · Σ v²)^beta` over channels within `depth_radius`.
    Lrn {
        depth_radius: usize,
        alpha: f32,
        beta: f32,
        bias: f32,
    },
}

impl LayerSpec {
    /// `(kernel, stride, pad)` for layers with a spatial footprint.
    pub fn window(&self) -> Option<(usize, usize, usize)> {
        match *self {
            LayerSpec::Conv {
                kernel,
                stride,
                pad,
                ..
            }
            | LayerSpec::MaxPool {
                kernel,
                stride,
                pad,
            } => Some((kernel, stride, pad)),
            _ => None,
        }
    }

    pub fn stride(&self) -> usize {
        self.window().map_or(1, |(_, s, _)| s)
    }

    fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Lrn { .. } => "lrn",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub spec: LayerSpec,
}

/// A named activation map taken from the output of layer `after`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tap {
    pub name: String,
    pub after: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetSpec {
    pub input_channels: usize,
    /// Multiplier applied to mean-subtracted input (255 for nets trained on 8-bit values).
    pub input_scale: f32,
    pub layers: Vec<Layer>,
    pub taps: Vec<Tap>,
}

/// Where a conv layer sits and the weight shapes it expects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub layer: usize,
    pub name: String,
    pub out_channels: usize,
    /// Input channels seen by each filter, i.e. per group.
    pub in_channels: usize,
    pub kernel: usize,
    pub groups: usize,
}

impl NetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 {
            return Err(Error::contract("input_channels must be positive"));
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(Error::contract("input_scale must be positive"));
        }
        for layer in &self.layers {
            if let Some((k, s, _)) = layer.spec.window() {
                if k == 0 || s == 0 {
                    return Err(Error::contract(format!(
                        "layer {}: kernel and stride must be at least 1",
                        layer.name
                    )));
                }
            }
            match layer.spec {
                LayerSpec::Conv {
                    out_channels: 0, ..
                } => {
                    return Err(Error::contract(format!(
                        "layer {}: out must be positive",
                        layer.name
                    )))
                }
                LayerSpec::MaxPool { kernel, pad, .. } if pad >= kernel => {
                    return Err(Error::contract(format!(
                        "layer {}: pool pad must be smaller than kernel",
                        layer.name
                    )))
                }
                LayerSpec::Lrn {
                    beta, bias, alpha, ..
                } if !(beta.is_finite() && bias.is_finite() && alpha.is_finite()) => {
                    return Err(Error::contract(format!(
                        "layer {}: non-finite lrn parameter",
                        layer.name
                    )))
                }
                _ => {}
            }
        }
        let mut channels = self.input_channels;
        for layer in &self.layers {
            if let LayerSpec::Conv {
                out_channels,
                groups,
                ..
            } = layer.spec
            {
                if groups == 0 || !channels.is_multiple_of(groups) || out_channels % groups != 0 {
                    return Err(Error::contract(format!(
                        "layer {}: groups={groups} must divide {channels} inputs and {out_channels} outputs",
                        layer.name
                    )));
                }
                channels = out_channels;
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if self.layers[..i].iter().any(|l| l.name == layer.name) {
                return Err(Error::contract(format!(
                    "duplicate layer name {}",
                    layer.name
                )));
            }
        }
        if self.taps.is_empty() {
            return Err(Error::contract("net declares no taps"));
        }
        for (i, tap) in self.taps.iter().enumerate() {
            if tap.after >= self.layers.len() {
                return Err(Error::contract(format!("tap {} has no layer", tap.name)));
            }
            if self.taps[..i].iter().any(|t| t.name == tap.name) {
                return Err(Error::contract(format!("duplicate tap name {}", tap.name)));
            }
        }
        Ok(())
    }

    pub fn conv_shapes(&self) -> Vec<ConvShape> {
        let mut channels = self.input_channels;
        let mut shapes = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let LayerSpec::Conv {
                out_channels,
                kernel,
                groups,
                ..
            } = layer.spec
            {
                shapes.push(ConvShape {
                    layer: i,
                    name: layer.name.clone(),
                    out_channels,
                    in_channels: channels / groups,
                    kernel,
                    groups,
                });
                channels = out_channels;
            }
        }
        shapes
    }

    /// Channel count of the output of layer `index`.
    pub fn channels_after(&self, index: usize) -> usize {
        self.layers[..=index]
            .iter()
            .rev()
            .find_map(|l| match l.spec {
                LayerSpec::Conv { out_channels, .. } => Some(out_channels),
                _ => None,
            })
            .unwrap_or(self.input_channels)
    }

    /// Product of the strides of layers `0..=index`.
    pub fn cumulative_stride(&self, index: usize) -> usize {
        self.layers[..=index]
            .iter()
            .map(|l| l.spec.stride())
            .product()
    }

    /// Receptive-field radius, in input pixels, of one activation after layer `index`.
    pub fn receptive_field_radius(&self, index: usize) -> usize {
        let mut size = 1;
        let mut jump = 1;
        for layer in &self.layers[..=index] {
            if let Some((k, s, _)) = layer.spec.window() {
                size += (k - 1) * jump;
                jump *= s;
            }
        }
        size / 2
    }

    pub fn tap(&self, name: &str) -> Result<&Tap> {
        self.taps
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::contract(format!("net has no tap named {name:?}")))
    }

    pub fn tap_names(&self) -> Vec<String> {
        self.taps.iter().map(|t| t.name.clone()).collect()
    }

    pub fn tap_channels(&self, name: &str) -> Result<usize> {
        Ok(self.channels_after(self.tap(name)?.after))
    }

    pub fn tap_stride(&self, name: &str) -> Result<usize> {
        Ok(self.cumulative_stride(self.tap(name)?.after))
    }

    /// Index of the deepest layer any of `taps` needs.
    pub fn last_layer_for(&self, taps: &[String]) -> Result<usize> {
        taps.iter()
            .map(|t| self.tap(t).map(|t| t.after))
            .try_fold(0, |acc, i| i.map(|i| acc.max(i)))
    }

    /// Zero gutter that isolates stitched tiles for the given taps: the
    /// receptive-field radius rounded up to a multiple of the coarsest stride.
    pub fn default_gutter(&self, taps: &[String]) -> Result<usize> {
        let last = self.last_layer_for(taps)?;
        let align = self.max_stride(last);
        Ok(self.receptive_field_radius(last).div_ceil(align) * align)
    }

    /// Largest cumulative stride reached by layers `0..=index`.
    pub fn max_stride(&self, index: usize) -> usize {
        (0..=index)
            .map(|i| self.cumulative_stride(i))
            .max()
            .unwrap_or(1)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut net = NetSpec {
            input_channels: 3,
            input_scale: 1.0,
            layers: Vec::new(),
            taps: Vec::new(),
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            let mut words = content.split_whitespace();
            let head = words.next().unwrap_or_default();
            match head {
                "layer" | "tap" => {
                    let mut fields = Fields::new(line, words)?;
                    if head == "tap" {
                        let name = fields.string("name")?;
                        fields.finish()?;
                        let after = net
                            .layers
                            .len()
                            .checked_sub(1)
                            .ok_or_else(|| perr("tap before any layer".into()))?;
                        net.taps.push(Tap { name, after });
                    } else {
                        let index = net.layers.len();
                        let kind = fields.string("kind")?;
                        let spec = match kind.as_str() {
                            "conv" => LayerSpec::Conv {
                                out_channels: fields.num("out")?,
                                kernel: fields.num("kernel")?,
                                stride: fields.num_or("stride", 1)?,
                                pad: fields.num_or("pad", 0)?,
                                groups: fields.num_or("groups", 1)?,
                            },
                            "relu" => LayerSpec::Relu,
                            "maxpool" => LayerSpec::MaxPool {
                                kernel: fields.num("kernel")?,
                                stride: fields.num_or("stride", 1)?,
                                pad: fields.num_or("pad", 0)?,
                            },
                            "lrn" => LayerSpec::Lrn {
                                depth_radius: fields.num("radius")?,
                                alpha: fields.num("alpha")?,
                                beta: fields.num("beta")?,
                                bias: fields.num_or("bias", 1.0)?,
                            },
                            other => return Err(perr(format!("unknown layer kind {other:?}"))),
                        };
                        let name = match fields.take("name") {
                            Some(n) => n,
                            None => format!("{}{}", spec.kind(), index),
                        };
                        fields.finish()?;
                        net.layers.push(Layer { name, spec });
                    }
                }
                _ => {
                    let (key, value) = content
                        .split_once('=')
                        .ok_or_else(|| perr(format!("expected key=value, got {content:?}")))?;
                    match key.trim() {
                        "input_channels" => {
                            net.input_channels = parse_value(line, "input_channels", value.trim())?
                        }
                        "input_scale" => {
                            net.input_scale = parse_value(line, "input_scale", value.trim())?
                        }
                        other => return Err(perr(format!("unknown key {other:?}"))),
                    }
                }
            }
        }
        net.validate()?;
        Ok(net)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "input_channels={}", self.input_channels);
        let _ = writeln!(s, "input_scale={}", self.input_scale);
        for (i, layer) in self.layers.iter().enumerate() {
            let _ = write!(s, "layer name={} kind={}", layer.name, layer.spec.kind());
            match layer.spec {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    pad,
                    groups,
                } => {
                    let _ = write!(
                        s,
                        " out={out_channels} kernel={kernel} stride={stride} pad={pad}"
                    );
                    if groups != 1 {
                        let _ = write!(s, " groups={groups}");
                    }
                }
                LayerSpec::MaxPool {
                    kernel,
                    stride,
                    pad,
                } => {
                    let _ = write!(s, " kernel={kernel} stride={stride} pad={pad}");
                }
                LayerSpec::Lrn {
                    depth_radius,
                    alpha,
                    beta,
                    bias,
                } => {
                    let _ = write!(
                        s,
                        " radius={depth_radius} alpha={alpha} beta={beta} bias={bias}"
                    );
                }
                LayerSpec::Relu => {}
            }
            s.push('\n');
            for tap in self.taps.iter().filter(|t| t.after == i) {
                let _ = writeln!(s, "tap name={}", tap.name);
            }
        }
        s
    }

    /// AlexNet's five convolutional stages with "same" padding, tapped after
    /// each stage's nonlinearity and normalization and before its pooling.
    ///
    /// Tap strides are 4, 8, 16, 16, 16 and tap widths 96, 256, 384, 384, 256.
    pub fn alexnet() -> Self {
        Self::parse(ALEXNET).expect("built-in alexnet spec parses")
    }

    /// A small network with AlexNet's stage structure for desk-scale runs.
    ///
    /// Tap strides are 1, 2, 4, 4, 4 and tap widths 16, 32, 32, 32, 32.
    pub fn desk() -> Self {
        Self::parse(DESK).expect("built-in desk spec parses")
    }

    /// Resolves `alexnet`, `desk`, or a path to a net file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "alexnet" => Ok(Self::alexnet()),
            "desk" => Ok(Self::desk()),
            path => Self::read(path),
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid value {value:?} for {key}"),
    })
}

struct Fields {
    line: usize,
    pairs: Vec<(String, String)>,
}

impl Fields {
    fn new<'a>(line: usize, words: impl Iterator<Item = &'a str>) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected key=value, got {w:?}"),
            })?;
            if pairs.iter().any(|(pk, _)| pk == k) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key {k:?}"),
                });
            }
            pairs.push((k.to_owned(), v.to_owned()));
        }
        Ok(Self { line, pairs })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let i = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(i).1)
    }

    fn string(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| Error::Parse {
            line: self.line,
            msg: format!("missing {key}="),
        })
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.string(key)?;
        parse_value(self.line, key, &v)
    }

    fn num_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            Some(v) => parse_value(self.line, key, &v),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err(Error::Parse {
                line: self.line,
                msg: format!("unknown key {k:?}"),
            }),
            None => Ok(()),
        }
    }
}

const ALEXNET: &str = "\
input_channels=3
input_scale=255
layer name=conv1 kind=conv out=96 kernel=11 stride=4 pad=5
layer name=relu1 kind=relu
layer name=norm1 kind=lrn radius=2 alpha=0.00002 beta=0.75 bias=1
tap name=Conv1
layer name=pool1 kind=maxpool kernel=3 stride=2 pad=1
layer name=conv2 kind=conv out=256 kernel=5 stride=1 pad=2 groups=2
layer name=relu2 kind=relu
layer name=norm2 kind=lrn radius=2 alpha=0.00002 beta=0.75 bias=1
tap name=Conv2
layer name=pool2 kind=maxpool kernel=3 stride=2 pad=1
layer name=conv3 kind=conv out=384 kernel=3 stride=1 pad=1
layer name=relu3 kind=relu
tap name=Conv3
layer name=conv4 kind=conv out=384 kernel=3 stride=1 pad=1 groups=2
layer name=relu4 kind=relu
tap name=Conv4
layer name=conv5 kind=conv out=256 kernel=3 stride=1 pad=1 groups=2
layer name=relu5 kind=relu
tap name=Conv5
";

const DESK: &str = "\
input_channels=3
input_scale=1
layer name=conv1 kind=conv out=16 kernel=5 stride=1 pad=2
layer name=relu1 kind=relu
tap name=Conv1
layer name=pool1 kind=maxpool kernel=3 stride=2 pad=1
layer name=conv2 kind=conv out=32 kernel=3 stride=1 pad=1
layer name=relu2 kind=relu
layer name=norm2 kind=lrn radius=2 alpha=0.0001 beta=0.75 bias=1
tap name=Conv2
layer name=pool2 kind=maxpool kernel=3 stride=2 pad=1
layer name=conv3 kind=conv out=32 kernel=3 stride=1 pad=1
layer name=relu3 kind=relu
tap name=Conv3
layer name=conv4 kind=conv out=32 kernel=3 stride=1 pad=1
layer name=relu4 kind=relu
tap name=Conv4
layer name=conv5 kind=conv out=32 kernel=3 stride=1 pad=1
layer name=relu5 kind=relu
tap name=Conv5
";
