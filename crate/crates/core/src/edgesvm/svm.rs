//! Binary linear SVM trained by stochastic subgradient descent on
//! standardized features.
//!
//! Minimizes `(λ/2)‖w‖² + (1/N) Σ max(0, 1 − y (w·x̂ + b))` with step
//! `1/(λt)`, projection onto the ball `‖w‖ ≤ 1/√λ`, and an unregularized
//! bias. The returned model is the running average of every iterate.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Origin of a training sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub image: usize,
    pub y: usize,
    pub x: usize,
}

/// Row-major `N×D` samples with ±1 labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainSet {
    dim: usize,
    samples: Vec<f32>,
    labels: Vec<i8>,
    provenance: Vec<Provenance>,
}

impl TrainSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn push(&mut self, features: &[f32], label: i8, provenance: Provenance) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::shape(format!(
                "sample has {} features, set holds {}",
                features.len(),
                self.dim
            )));
        }
        if label != 1 && label != -1 {
            return Err(Error::contract(format!("label must be ±1, got {label}")));
        }
        self.samples.extend_from_slice(features);
        self.labels.push(label);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn extend(&mut self, other: &TrainSet) -> Result<()> {
        if other.dim != self.dim && !other.is_empty() {
            return Err(Error::shape("cannot merge sets of different dimension"));
        }
        self.samples.extend_from_slice(&other.samples);
        self.labels.extend_from_slice(&other.labels);
        self.provenance.extend_from_slice(&other.provenance);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub w: Vec<f32>,
    pub b: f32,
    pub lambda: f32,
    pub feature_mean: Vec<f32>,
    pub feature_scale: Vec<f32>,
    pub score_lo: f32,
    pub score_hi: f32,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.w.len();
        if self.feature_mean.len() != d || self.feature_scale.len() != d {
            return Err(Error::shape("model vectors differ in length"));
        }
        if self.feature_scale.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::contract("feature scales must be positive"));
        }
        if self.score_lo.is_nan() || self.score_hi.is_nan() || self.score_lo >= self.score_hi {
            return Err(Error::contract("score_lo must be below score_hi"));
        }
        Ok(())
    }

    /// `w · x̂ + b` with `x̂ = (x − mean) / scale`.
    pub fn raw_score(&self, x: &[f32]) -> f64 {
        let dot: f64 = x
            .iter()
            .zip(&self.w)
            .zip(self.feature_mean.iter().zip(&self.feature_scale))
            .map(|((&x, &w), (&m, &s))| w as f64 * ((x as f64 - m as f64) / s as f64))
            .sum();
        dot + self.b as f64
    }

    /// Raw score mapped affinely so `score_lo → 0`, `score_hi → 1`, then clamped.
    pub fn edge_strength(&self, x: &[f32]) -> f32 {
        let s = self.raw_score(x);
        let lo = self.score_lo as f64;
        let hi = self.score_hi as f64;
        ((s - lo) / (hi - lo)).clamp(0.0, 1.0) as f32
    }

    pub fn predict(&self, x: &[f32]) -> i8 {
        if self.raw_score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// The training objective on `set`, in standardized coordinates.
    pub fn objective(&self, set: &TrainSet) -> f64 {
        objective(
            &self.w_f64(),
            self.b as f64,
            self.lambda as f64,
            set,
            &self.standardizer(),
        )
    }

    fn w_f64(&self) -> Vec<f64> {
        self.w.iter().map(|&v| v as f64).collect()
    }

    fn standardizer(&self) -> Standardizer {
        Standardizer {
            mean: self.feature_mean.iter().map(|&v| v as f64).collect(),
            scale: self.feature_scale.iter().map(|&v| v as f64).collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Per-feature mean and population standard deviation; constant
    /// features get scale 1.
    fn fit(set: &TrainSet) -> Self {
        let (n, d) = (set.len() as f64, set.dim());
        let mut mean = vec![0.0; d];
        for i in 0..set.len() {
            for (m, &x) in mean.iter_mut().zip(set.sample(i)) {
                *m += x as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..set.len() {
            for ((v, &x), m) in var.iter_mut().zip(set.sample(i)).zip(&mean) {
                *v += (x as f64 - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        // store what the model will store, so training and scoring agree bit for bit
        let round = |v: Vec<f64>| v.into_iter().map(|x| x as f32 as f64).collect();
        Standardizer {
            mean: round(mean),
            scale: round(scale),
        }
    }

    fn apply(&self, x: &[f32], out: &mut [f64]) {
        for (((o, &x), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.scale) {
            *o = (x as f64 - m) / s;
        }
    }
}

fn objective(w: &[f64], b: f64, lambda: f64, set: &TrainSet, st: &Standardizer) -> f64 {
    let mut xs = vec![0.0; set.dim()];
    let hinge: f64 = (0..set.len())
        .map(|i| {
            st.apply(set.sample(i), &mut xs);
            let score: f64 = w.iter().zip(&xs).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - set.label(i) as f64 * score).max(0.0)
        })
        .sum();
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / set.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub model: SvmModel,
    /// Objective of the averaged iterate at the end of each epoch.
    pub epoch_objectives: Vec<f64>,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let i = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[i.min(sorted.len() - 1)]
}

pub fn train_svm(set: &TrainSet, config: &SvmConfig) -> Result<Trained> {
    let lambda = config.lambda;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::contract(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if config.epochs == 0 {
        return Err(Error::contract("at least one epoch is required"));
    }
    if set.len() < 2 || set.positives() == 0 || set.negatives() == 0 {
        return Err(Error::contract(
            "training needs at least two samples covering both classes",
        ));
    }
    let d = set.dim();
    let st = Standardizer::fit(set);
    let xs: Vec<f64> = {
        let mut all = vec![0.0; set.len() * d];
        for i in 0..set.len() {
            st.apply(set.sample(i), &mut all[i * d..(i + 1) * d]);
        }
        all
    };
    let radius = 1.0 / lambda.sqrt();

    let mut rng = rng::stream(config.seed, "sgd", 0);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut w = vec![0.0f64; d];
    let mut b = 0.0f64;
    let mut t = 0u64;
    let mut sum_w = vec![0.0f64; d];
    let mut sum_b = 0.0f64;
    let mut epoch_objectives = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &xs[i * d..(i + 1) * d];
            let y = set.label(i) as f64;
            let margin = y * (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, &xi) in w.iter_mut().zip(x) {
                    *v += eta * y * xi;
                }
                b += eta * y;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
            for (a, v) in sum_w.iter_mut().zip(&w) {
                *a += v;
            }
            sum_b += b;
        }
        let n = t as f64;
        let ew: Vec<f64> = sum_w.iter().map(|v| v / n).collect();
        epoch_objectives.push(objective(&ew, sum_b / n, lambda, set, &st));
    }

    let n = t as f64;
    let w: Vec<f32> = sum_w.iter().map(|v| (v / n) as f32).collect();
    let b = (sum_b / n) as f32;
    let mut model = SvmModel {
        w,
        b,
        lambda: lambda as f32,
        feature_mean: st.mean.iter().map(|&v| v as f32).collect(),
        feature_scale: st.scale.iter().map(|&v| v as f32).collect(),
        score_lo: 0.0,
        score_hi: 1.0,
    };
    let mut scores: Vec<f64> = (0..set.len())
        .map(|i| model.raw_score(set.sample(i)))
        .collect();
    scores.sort_by(f64::total_cmp);
    let (mut lo, mut hi) = (
        percentile(&scores, 1.0) as f32,
        percentile(&scores, 99.0) as f32,
    );
    if lo >= hi {
        lo -= 0.5;
        hi += 0.5;
    }
    model.score_lo = lo;
    model.score_hi = hi;
    Ok(Trained {
        model,
        epoch_objectives,
    })
}
