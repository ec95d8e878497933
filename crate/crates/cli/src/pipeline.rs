//! Training, detection and evaluation over whole image sets.

use contour_core::bench::{self, BenchReport, GroundTruth};
use contour_core::convnet::{channel_mean, NetSpec, WeightBundle};
use contour_core::densefeat::PixelFeatureField;
use contour_core::edgesvm::{
    detect_scales, image_features, sample_pixels, train_svm, EdgeModel, FeatureScorer, Sampled,
    TrainSet,
};
use contour_core::nms::thin_edges;
use contour_core::ImagePlane;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::Example;
use crate::error::{CliError, Result};

/// A network together with its weights.
pub struct Extractor {
    pub net: NetSpec,
    pub weights: WeightBundle,
}

impl Extractor {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let net = NetSpec::resolve(&config.net)?;
        let weights = WeightBundle::resolve(&config.weights, &net, config.seed)?;
        Ok(Self { net, weights })
    }

    /// The configured taps, or every tap of the net when none are given.
    pub fn taps(&self, config: &RunConfig) -> Result<Vec<String>> {
        let taps = if config.taps.is_empty() {
            self.net.tap_names()
        } else {
            config.taps.clone()
        };
        for t in &taps {
            self.net.tap(t)?;
        }
        Ok(taps)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: EdgeModel,
    pub epoch_objectives: Vec<f64>,
    pub samples: usize,
    pub skipped: Vec<String>,
}

/// Extracts single-resolution features of every example, samples labelled
/// pixels and fits the classifier.
pub fn train(
    examples: &[Example],
    extractor: &Extractor,
    taps: &[String],
    config: &RunConfig,
) -> Result<TrainOutcome> {
    let channel_mean = channel_mean(examples.iter().map(|e| &e.image))?;
    let dim = contour_core::densefeat::feature_dim(&extractor.net, taps, 1)?;
    let sampling = config.sampling();
    let per_image: Vec<Sampled> = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let field = image_features(
                &ex.image,
                &extractor.net,
                &extractor.weights,
                taps,
                &channel_mean,
            )?;
            Ok(sample_pixels(&field, &ex.gt, i, &sampling)?)
        })
        .collect::<Result<_>>()?;

    let mut set = TrainSet::new(dim);
    let mut skipped = Vec::new();
    for (ex, s) in examples.iter().zip(per_image) {
        match s {
            Sampled::Samples(part) => set.extend(&part)?,
            Sampled::Skipped(reason) => {
                log::warn!("skipping {}: {reason:?}", ex.id);
                skipped.push(ex.id.clone());
            }
        }
    }
    if set.is_empty() {
        return Err(CliError::Usage("no image yielded training samples".into()));
    }
    let trained = train_svm(&set, &config.svm())?;
    Ok(TrainOutcome {
        model: EdgeModel {
            svm: trained.model,
            taps: taps.to_vec(),
            channel_mean,
        },
        epoch_objectives: trained.epoch_objectives,
        samples: set.len(),
        skipped,
    })
}

/// `epoch  objective` lines.
pub fn training_log(objectives: &[f64]) -> String {
    let mut s = String::from("epoch\tobjective\n");
    for (i, o) in objectives.iter().enumerate() {
        s.push_str(&format!("{}\t{o:.9}\n", i + 1));
    }
    s
}

/// Rounds to the 16-bit grid edge maps are stored on.
pub fn quantize16(map: &ImagePlane) -> ImagePlane {
    map.map(|v| ((v as f64 * 65535.0 + 0.5).floor() / 65535.0) as f32)
}

/// The original-resolution feature field the model scores.
pub fn features_one(
    image: &ImagePlane,
    extractor: &Extractor,
    model: &EdgeModel,
) -> Result<PixelFeatureField> {
    Ok(image_features(
        image,
        &extractor.net,
        &extractor.weights,
        &model.taps,
        &model.channel_mean,
    )?)
}

/// Multi-resolution detection of one image, optionally thinned.
pub fn detect_one(
    image: &ImagePlane,
    extractor: &Extractor,
    model: &EdgeModel,
    config: &RunConfig,
    nms: bool,
) -> Result<ImagePlane> {
    let scorer = FeatureScorer::new(&extractor.net, &extractor.weights, model)?;
    let map = detect_scales(&scorer, image, &config.scales)?;
    if nms {
        Ok(thin_edges(&map, config.sigma)?)
    } else {
        Ok(map)
    }
}

pub fn detect_all(
    images: &[&ImagePlane],
    extractor: &Extractor,
    model: &EdgeModel,
    config: &RunConfig,
    nms: bool,
) -> Result<Vec<ImagePlane>> {
    images
        .par_iter()
        .map(|img| detect_one(img, extractor, model, config, nms))
        .collect()
}

/// Benchmarks edge maps against ground truth, one pair per image.
pub fn evaluate(
    edges: &[ImagePlane],
    gts: &[&GroundTruth],
    config: &RunConfig,
) -> Result<BenchReport> {
    if edges.len() != gts.len() {
        return Err(CliError::Usage(format!(
            "{} edge maps for {} ground truths",
            edges.len(),
            gts.len()
        )));
    }
    let thresholds = bench::default_thresholds(config.thresholds);
    let bench_config = config.bench();
    let tables = edges
        .par_iter()
        .zip(gts.par_iter())
        .map(|(e, g)| bench::evaluate_image(e, g, &thresholds, &bench_config))
        .collect::<contour_core::Result<Vec<_>>>()?;
    Ok(bench::summarize(&tables)?)
}
