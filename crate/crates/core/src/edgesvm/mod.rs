//! Linear-SVM edge classifier over per-pixel descriptors.
//!
//! [`sample_pixels`] draws labelled pixels from ground truth, [`train_svm`]
//! fits the classifier, [`score_field`] maps descriptors to edge strengths
//! in `[0, 1]` and [`detect`] averages detections at the original and at
//! double resolution.

mod detect;
mod sampling;
mod svm;

use std::path::Path;

use rayon::prelude::*;

pub use detect::{detect, detect_dual, detect_scales, image_features, EdgeScorer, FeatureScorer};
pub use sampling::{
    sample_pixels, Sampled, SamplingConfig, SkipReason, CONSENSUS_THRESHOLD, NEGATIVE_BUFFER,
};
pub use svm::{train_svm, Provenance, SvmConfig, SvmModel, TrainSet, Trained};

use crate::densefeat::PixelFeatureField;
use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::tensor::{Bundle, Tensor};

/// Edge strength of every pixel of a descriptor field.
pub fn score_field(field: &PixelFeatureField, model: &SvmModel) -> Result<ImagePlane> {
    if field.dim() != model.dim() {
        return Err(Error::contract(format!(
            "field has {} features, model expects {}",
            field.dim(),
            model.dim()
        )));
    }
    let (h, w) = (field.height(), field.width());
    let mut out = ImagePlane::zeros(h, w, 1);
    out.data_mut()
        .par_chunks_mut(w.max(1))
        .enumerate()
        .for_each(|(y, row)| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = model.edge_strength(field.descriptor(y, x));
            }
        });
    Ok(out)
}

/// A trained detector: the classifier, the taps it was trained on and the
/// input mean used to preprocess images.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeModel {
    pub svm: SvmModel,
    pub taps: Vec<String>,
    pub channel_mean: Vec<f32>,
}

const TAP_PREFIX: &str = "tap/";

impl EdgeModel {
    pub fn to_bundle(&self) -> Bundle {
        let s = &self.svm;
        let mut b = Bundle::new();
        let records = [
            ("w", Tensor::vector(s.w.clone())),
            ("b", Tensor::scalar(s.b)),
            ("mean", Tensor::vector(s.feature_mean.clone())),
            ("scale", Tensor::vector(s.feature_scale.clone())),
            ("score_lo_hi", Tensor::vector(vec![s.score_lo, s.score_hi])),
            ("lambda", Tensor::scalar(s.lambda)),
            ("channel_mean", Tensor::vector(self.channel_mean.clone())),
        ];
        for (name, t) in records {
            b.push(name, t).expect("fixed record names are unique");
        }
        for (i, tap) in self.taps.iter().enumerate() {
            b.push(format!("{TAP_PREFIX}{tap}"), Tensor::scalar(i as f32))
                .expect("tap names are unique");
        }
        b
    }

    pub fn from_bundle(bundle: &Bundle) -> Result<Self> {
        let get = |name: &str| {
            bundle
                .get(name)
                .map(|t| t.data().to_vec())
                .ok_or_else(|| Error::shape(format!("model lacks record {name:?}")))
        };
        let scalar = |name: &str| -> Result<f32> {
            match get(name)?[..] {
                [v] => Ok(v),
                _ => Err(Error::shape(format!("record {name:?} must hold one value"))),
            }
        };
        let lo_hi = get("score_lo_hi")?;
        if lo_hi.len() != 2 {
            return Err(Error::shape("score_lo_hi must hold two values"));
        }
        let mut taps: Vec<(f32, String)> = bundle
            .records()
            .iter()
            .filter_map(|(n, t)| {
                n.strip_prefix(TAP_PREFIX)
                    .map(|tap| (t.data().first().copied().unwrap_or(0.0), tap.to_string()))
            })
            .collect();
        taps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let svm = SvmModel {
            w: get("w")?,
            b: scalar("b")?,
            lambda: scalar("lambda")?,
            feature_mean: get("mean")?,
            feature_scale: get("scale")?,
            score_lo: lo_hi[0],
            score_hi: lo_hi[1],
        };
        svm.validate()?;
        if taps.is_empty() {
            return Err(Error::shape("model names no taps"));
        }
        Ok(Self {
            svm,
            taps: taps.into_iter().map(|(_, t)| t).collect(),
            channel_mean: get("channel_mean")?,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bundle(&Bundle::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_bundle().write(path)
    }
}
