//! Run configuration: defaults, `key = value` files and flag overrides.

use std::path::{Path, PathBuf};

use contour_core::bench::{Matcher, DEFAULT_THRESHOLDS, DEFAULT_TOL_FRACTION};
use contour_core::edgesvm::{SamplingConfig, SvmConfig};
use contour_core::nms::DEFAULT_SIGMA;

use crate::error::{CliError, Result};

/// Every tunable of the pipeline. Unset fields keep the defaults below.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    /// `alexnet`, `desk`, or a net description file.
    pub net: String,
    /// `filterbank`, `random`, or a `PXW1` weight file.
    pub weights: String,
    /// Empty means every tap of the net.
    pub taps: Vec<String>,
    /// Resolutions whose edge maps are averaged at detection time.
    pub scales: Vec<f64>,
    pub lambda: f64,
    pub epochs: usize,
    pub pos_cap: usize,
    pub neg_ratio: f64,
    pub sigma: f64,
    pub tol: f64,
    pub thresholds: usize,
    pub matcher: Matcher,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            net: "desk".into(),
            weights: "filterbank".into(),
            taps: Vec::new(),
            scales: vec![1.0, 2.0],
            lambda: 1e-4,
            epochs: 20,
            pos_cap: 200,
            neg_ratio: 2.0,
            sigma: DEFAULT_SIGMA,
            tol: DEFAULT_TOL_FRACTION,
            thresholds: DEFAULT_THRESHOLDS,
            matcher: Matcher::Greedy,
            seed: 0,
            jobs: 0,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

pub fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_matcher(value: &str) -> std::result::Result<Matcher, String> {
    match value {
        "greedy" => Ok(Matcher::Greedy),
        "exact" => Ok(Matcher::Exact),
        other => Err(format!("unknown matcher {other:?} (greedy or exact)")),
    }
}

impl RunConfig {
    /// Sets one field from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key.replace('-', "_").as_str() {
            "data" => self.data = Some(PathBuf::from(value)),
            "net" => self.net = value.to_string(),
            "weights" => self.weights = value.to_string(),
            "taps" => self.taps = parse_list(value),
            "scales" => {
                self.scales = parse_list(value)
                    .iter()
                    .map(|s| parse_num("scales", s))
                    .collect::<std::result::Result<_, _>>()?
            }
            "lambda" => self.lambda = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "pos_cap" => self.pos_cap = parse_num(key, value)?,
            "neg_ratio" => self.neg_ratio = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "thresholds" => self.thresholds = parse_num(key, value)?,
            "matcher" => self.matcher = parse_matcher(value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| CliError::Config { line: i + 1, msg })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return fail("lambda must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.pos_cap == 0 {
            return fail("pos_cap must be at least 1");
        }
        if !(self.neg_ratio.is_finite() && self.neg_ratio > 0.0) {
            return fail("neg_ratio must be positive");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail("sigma must be positive");
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return fail("tol must be non-negative");
        }
        if self.thresholds == 0 {
            return fail("thresholds must be at least 1");
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return fail("scales must be a non-empty list of positive numbers");
        }
        Ok(())
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            lambda: self.lambda,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            pos_cap: self.pos_cap,
            neg_ratio: self.neg_ratio,
            seed: self.seed,
        }
    }

    pub fn bench(&self) -> contour_core::bench::BenchConfig {
        contour_core::bench::BenchConfig {
            tol_fraction: self.tol,
            matcher: self.matcher,
        }
    }

    pub fn data_root(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage("no dataset given (--data or data = ...)".into()))
    }
}
