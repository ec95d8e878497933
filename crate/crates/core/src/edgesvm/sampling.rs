//! Choosing labelled training pixels from multi-annotator ground truth.

use rand::seq::index;

use super::svm::{Provenance, TrainSet};
use crate::bench::GroundTruth;
use crate::densefeat::PixelFeatureField;
use crate::error::{Error, Result};
use crate::rng;

/// Fraction of annotators that must mark a pixel for it to count as a
/// positive.
pub const CONSENSUS_THRESHOLD: f32 = 0.5;

/// Negatives keep strictly more than this distance (in pixels) from every
/// annotator's boundary.
pub const NEGATIVE_BUFFER: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingConfig {
    pub pos_cap: usize,
    pub neg_ratio: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            pos_cap: 200,
            neg_ratio: 2.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipReason {
    NoPositives,
    NoNegatives,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sampled {
    Samples(TrainSet),
    Skipped(SkipReason),
}

/// Pixels farther than [`NEGATIVE_BUFFER`] from every marked pixel of every
/// annotator, row-major.
fn buffered_background(gt: &GroundTruth) -> Vec<(usize, usize)> {
    let (h, w) = gt.dims();
    let r = NEGATIVE_BUFFER.floor() as isize;
    let r2 = NEGATIVE_BUFFER * NEGATIVE_BUFFER;
    let mut near = vec![false; h * w];
    for a in gt.annotators() {
        for (y, x) in a.pixels() {
            for dy in -r..=r {
                for dx in -r..=r {
                    if ((dy * dy + dx * dx) as f64) > r2 {
                        continue;
                    }
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                        near[yy as usize * w + xx as usize] = true;
                    }
                }
            }
        }
    }
    (0..h * w)
        .filter(|&i| !near[i])
        .map(|i| (i / w, i % w))
        .collect()
}

/// Picks `k` of `pool` uniformly at random, preserving pool order.
fn subset<R: rand::Rng>(rng: &mut R, pool: Vec<(usize, usize)>, k: usize) -> Vec<(usize, usize)> {
    if k >= pool.len() {
        return pool;
    }
    let mut picked = index::sample(rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i]).collect()
}

/// Labelled samples from one image. `image` is recorded in the provenance
/// and selects the random stream, so images sample independently.
pub fn sample_pixels(
    field: &PixelFeatureField,
    gt: &GroundTruth,
    image: usize,
    config: &SamplingConfig,
) -> Result<Sampled> {
    if gt.dims() != (field.height(), field.width()) {
        return Err(Error::shape(format!(
            "ground truth is {:?}, features are {}x{}",
            gt.dims(),
            field.height(),
            field.width()
        )));
    }
    if !(config.neg_ratio.is_finite() && config.neg_ratio >= 0.0) {
        return Err(Error::contract("neg_ratio must be non-negative"));
    }
    let consensus = gt.consensus();
    let (h, w) = gt.dims();
    let positives: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .filter(|&(y, x)| consensus.get(y, x, 0) >= CONSENSUS_THRESHOLD)
        .collect();
    if positives.is_empty() {
        return Ok(Sampled::Skipped(SkipReason::NoPositives));
    }
    let background = buffered_background(gt);
    if background.is_empty() {
        return Ok(Sampled::Skipped(SkipReason::NoNegatives));
    }

    let mut rng = rng::stream(config.seed, "sampling", image as u64);
    let positives = subset(&mut rng, positives, config.pos_cap);
    let n_neg = (config.neg_ratio * positives.len() as f64).round() as usize;
    let negatives = subset(&mut rng, background, n_neg);

    let mut set = TrainSet::new(field.dim());
    for (pixels, label) in [(positives, 1i8), (negatives, -1i8)] {
        for (y, x) in pixels {
            set.push(field.descriptor(y, x), label, Provenance { image, y, x })?;
        }
    }
    Ok(Sampled::Samples(set))
}
