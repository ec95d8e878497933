//! Boundary benchmark: threshold sweep, thinning, tolerance matching against
//! every annotator, and the ODS / OIS / AP summary.
//!
//! Counting follows the usual multi-annotator convention: a detected pixel is
//! a true positive if it matches *any* annotator, while recall accumulates
//! matches against *each* annotator separately.

mod binary;
mod matching;
mod thin;

use std::fmt::Write as _;

pub use binary::BinaryMap;
pub use matching::{correspond, hungarian, Correspondence, Matcher};
pub use thin::{threshold_and_thin, zhang_suen};

use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Default match tolerance as a fraction of the image diagonal.
pub const DEFAULT_TOL_FRACTION: f64 = 0.0075;
pub const DEFAULT_THRESHOLDS: usize = 99;

/// `k / (n + 1)` for `k = 1..=n`; 99 levels gives `0.01 ..= 0.99`.
pub fn default_thresholds(n: usize) -> Vec<f32> {
    (1..=n)
        .map(|k| (k as f64 / (n + 1) as f64) as f32)
        .collect()
}

/// Boundary maps of every annotator of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    annotators: Vec<BinaryMap>,
}

impl GroundTruth {
    pub fn new(annotators: Vec<BinaryMap>) -> Result<Self> {
        let first = annotators
            .first()
            .ok_or_else(|| Error::contract("ground truth needs at least one annotator"))?;
        if annotators.iter().any(|a| a.dims() != first.dims()) {
            return Err(Error::shape("annotator maps differ in size"));
        }
        Ok(Self { annotators })
    }

    /// Binarizes one-channel planes at 0.5.
    pub fn from_planes(planes: &[ImagePlane]) -> Result<Self> {
        Self::new(
            planes
                .iter()
                .map(|p| BinaryMap::threshold(p, 0.5))
                .collect::<Result<_>>()?,
        )
    }

    pub fn annotators(&self) -> &[BinaryMap] {
        &self.annotators
    }

    pub fn dims(&self) -> (usize, usize) {
        self.annotators[0].dims()
    }

    /// Fraction of annotators marking each pixel.
    pub fn consensus(&self) -> ImagePlane {
        let (h, w) = self.dims();
        let n = self.annotators.len() as f32;
        ImagePlane::from_fn(h, w, 1, |y, x, _| {
            self.annotators.iter().filter(|a| a.get(y, x)).count() as f32 / n
        })
    }
}

/// Raw match counts of one image (or a whole dataset) at one threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub matched_det: u64,
    pub total_det: u64,
    pub matched_gt: u64,
    pub total_gt: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.total_det == 0 {
            1.0
        } else {
            self.matched_det as f64 / self.total_det as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.total_gt == 0 {
            0.0
        } else {
            self.matched_gt as f64 / self.total_gt as f64
        }
    }

    pub fn f_measure(&self) -> f64 {
        f_measure(self.precision(), self.recall())
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.matched_det += o.matched_det;
        self.total_det += o.total_det;
        self.matched_gt += o.matched_gt;
        self.total_gt += o.total_gt;
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PRPoint {
    pub threshold: f32,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl PRPoint {
    pub fn new(threshold: f32, counts: Counts) -> Self {
        Self {
            threshold,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f: counts.f_measure(),
        }
    }
}

/// Per-threshold counts for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTable {
    pub points: Vec<PRPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchConfig {
    pub tol_fraction: f64,
    pub matcher: Matcher,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            tol_fraction: DEFAULT_TOL_FRACTION,
            matcher: Matcher::Greedy,
        }
    }
}

/// Sweeps `thresholds` over one soft edge map.
pub fn evaluate_image(
    edge_map: &ImagePlane,
    gt: &GroundTruth,
    thresholds: &[f32],
    config: &BenchConfig,
) -> Result<ImageTable> {
    if (edge_map.height(), edge_map.width()) != gt.dims() {
        return Err(Error::shape(format!(
            "edge map {}x{} does not match ground truth {:?}",
            edge_map.height(),
            edge_map.width(),
            gt.dims()
        )));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::contract("thresholds must be sorted ascending"));
    }
    let (h, w) = gt.dims();
    let max_dist = config.tol_fraction * ((h * h + w * w) as f64).sqrt();
    let total_gt: u64 = gt.annotators().iter().map(|a| a.count() as u64).sum();

    let points = thresholds
        .iter()
        .map(|&t| {
            let det = threshold_and_thin(edge_map, t)?;
            let mut any = BinaryMap::new(h, w);
            let mut matched_gt = 0u64;
            for annotator in gt.annotators() {
                let c = correspond(&det, annotator, max_dist, config.matcher)?;
                matched_gt += c.matched_gt as u64;
                for (y, x) in c.det_matched.pixels() {
                    any.set(y, x, true);
                }
            }
            Ok(PRPoint::new(
                t,
                Counts {
                    matched_det: any.count() as u64,
                    total_det: det.count() as u64,
                    matched_gt,
                    total_gt,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageTable { points })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    /// Dataset-level curve from counts summed over images.
    pub pr_curve: Vec<PRPoint>,
    pub ods: f64,
    pub ods_threshold: f32,
    pub ois: f64,
    pub ap: f64,
    pub per_image: Vec<ImageTable>,
}

/// Index of the first point with the highest F.
fn best_f(points: &[PRPoint]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.f > points[best].f {
            best = i;
        }
    }
    best
}

/// Mean interpolated precision at recalls `0.01, 0.02, …, 1.00`; levels above
/// the highest achieved recall contribute zero.
pub fn average_precision(curve: &[PRPoint]) -> f64 {
    let total: f64 = (1..=100)
        .map(|k| {
            let r = k as f64 / 100.0;
            curve
                .iter()
                .filter(|p| p.recall >= r - 1e-12)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum();
    total / 100.0
}

/// Folds per-image tables into ODS, OIS and AP.
pub fn summarize(tables: &[ImageTable]) -> Result<BenchReport> {
    let first = tables
        .first()
        .ok_or_else(|| Error::contract("cannot summarize an empty dataset"))?;
    let thresholds: Vec<f32> = first.points.iter().map(|p| p.threshold).collect();
    if thresholds.is_empty() {
        return Err(Error::contract("tables hold no thresholds"));
    }
    for table in tables {
        if table.points.len() != thresholds.len()
            || table
                .points
                .iter()
                .zip(&thresholds)
                .any(|(p, t)| p.threshold != *t)
        {
            return Err(Error::contract(
                "images were evaluated on different thresholds",
            ));
        }
    }

    let pr_curve: Vec<PRPoint> = thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut sum = Counts::default();
            for table in tables {
                sum += table.points[i].counts;
            }
            PRPoint::new(t, sum)
        })
        .collect();
    let ods_index = best_f(&pr_curve);

    let mut ois_counts = Counts::default();
    for table in tables {
        ois_counts += table.points[best_f(&table.points)].counts;
    }

    Ok(BenchReport {
        ods: pr_curve[ods_index].f,
        ods_threshold: pr_curve[ods_index].threshold,
        ois: ois_counts.f_measure(),
        ap: average_precision(&pr_curve),
        pr_curve,
        per_image: tables.to_vec(),
    })
}

impl BenchReport {
    /// `threshold  precision  recall  f`, one line per threshold.
    pub fn pr_tsv(&self) -> String {
        let mut s = String::from("threshold\tprecision\trecall\tf\n");
        for p in &self.pr_curve {
            let _ = writeln!(
                s,
                "{:.6}\t{:.6}\t{:.6}\t{:.6}",
                p.threshold, p.precision, p.recall, p.f
            );
        }
        s
    }

    pub fn summary_tsv(&self) -> String {
        format!(
            "ods\tods_threshold\tois\tap\n{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            self.ods, self.ods_threshold, self.ois, self.ap
        )
    }
}

/// Three-decimal cell without the leading zero (`.741`).
fn cell(v: f64) -> String {
    let s = format!("{v:.3}");
    s.strip_prefix('0').map(str::to_owned).unwrap_or(s)
}

/// Ablation table: one column per detector, rows ODS / OIS / AP.
pub fn format_table(columns: &[(String, [f64; 3])]) -> String {
    let mut s = String::new();
    for (name, _) in columns {
        s.push('\t');
        s.push_str(name);
    }
    s.push('\n');
    for (row, label) in ["ODS", "OIS", "AP"].iter().enumerate() {
        s.push_str(label);
        for (_, values) in columns {
            s.push('\t');
            s.push_str(&cell(values[row]));
        }
        s.push('\n');
    }
    s
}
