//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "contour",
    version,
    about = "Contour detection from per-pixel convnet features",
    long_about = "Contour detection from per-pixel convnet features.\n\n\
        Every tunable can also be set in a key = value file passed with --config \
        (keys are the long flag names, e.g. `pos-cap = 100`); flags win over the file."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset of shapes on textured backgrounds.
    Synth(SynthArgs),
    /// Train an edge classifier on a dataset split.
    Train(TrainArgs),
    /// Write 16-bit PGM edge maps for a set of images.
    Detect(DetectArgs),
    /// Benchmark edge maps against a split's ground truth.
    Eval(EvalArgs),
    /// Train and evaluate one detector per tap plus one on all taps.
    Ablate(AblateArgs),
}

#[derive(Debug, Default, Args)]
pub struct Common {
    /// key = value configuration file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core [default: 0]. Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Default, Args)]
pub struct NetOpts {
    /// Net: `desk`, `alexnet`, or a net description file [default: desk].
    #[arg(long)]
    pub net: Option<String>,
    /// Weights: `filterbank`, `random`, or a PXW1 weight file [default: filterbank].
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct TapOpts {
    /// Comma-separated taps, e.g. `Conv1,Conv2` [default: every tap of the net].
    #[arg(long)]
    pub taps: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct SvmOpts {
    /// SVM regularization strength [default: 1e-4].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Passes of stochastic subgradient descent [default: 20].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Maximum positive samples per image [default: 200].
    #[arg(long)]
    pub pos_cap: Option<usize>,
    /// Negatives drawn per positive [default: 2].
    #[arg(long)]
    pub neg_ratio: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct DetectOpts {
    /// Comma-separated resolutions whose edge maps are averaged [default: 1,2].
    #[arg(long)]
    pub scales: Option<String>,
    /// Gaussian sigma of the orientation estimate used for thinning [default: 2].
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct BenchOpts {
    /// Match tolerance as a fraction of the image diagonal [default: 0.0075].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of evenly spaced thresholds in (0, 1) [default: 99].
    #[arg(long)]
    pub thresholds: Option<usize>,
    /// Pixel correspondence: `greedy` or `exact` [default: greedy].
    #[arg(long)]
    pub matcher: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset root.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub n_train: usize,
    #[arg(long, default_value_t = 0)]
    pub n_val: usize,
    #[arg(long, default_value_t = 20)]
    pub n_test: usize,
    /// Side length of the square images.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Simulated annotators per image (1 to 3).
    #[arg(long, default_value_t = 3)]
    pub annotators: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Output model file; the per-epoch objective goes to `<model>.log`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub net: NetOpts,
    #[command(flatten)]
    pub taps: TapOpts,
    #[command(flatten)]
    pub svm: SvmOpts,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Model written by `train`. Use the same net, weights and seed.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory receiving `<id>.pgm` edge maps.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip non-maximal suppression and write the soft maps.
    #[arg(long)]
    pub no_nms: bool,
    /// Also write each image's per-pixel feature field as `<id>.pxf` (PXF1, H×W×D) here.
    #[arg(long, value_name = "DIR")]
    pub features: Option<PathBuf>,
    /// Images, or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub net: NetOpts,
    #[command(flatten)]
    pub detect: DetectOpts,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Directory of `<id>.pgm` edge maps.
    #[arg(long)]
    pub edges: PathBuf,
    /// Directory receiving pr.tsv and summary.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub bench: BenchOpts,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Dataset root.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    pub train_split: String,
    #[arg(long, default_value = "test")]
    pub test_split: String,
    /// Directory receiving table.tsv and one report directory per detector.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub net: NetOpts,
    #[command(flatten)]
    pub svm: SvmOpts,
    #[command(flatten)]
    pub detect: DetectOpts,
    #[command(flatten)]
    pub bench: BenchOpts,
}

/// Flag values that were given, as `(config key, text)` pairs.
pub trait Overrides {
    fn overrides(&self) -> Vec<(&'static str, String)>;
}

fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

impl Overrides for Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "seed", &self.seed);
        push(&mut o, "jobs", &self.jobs);
        o
    }
}

impl Overrides for NetOpts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "net", &self.net);
        push(&mut o, "weights", &self.weights);
        o
    }
}

impl Overrides for TapOpts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "taps", &self.taps);
        o
    }
}

impl Overrides for SvmOpts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "lambda", &self.lambda);
        push(&mut o, "epochs", &self.epochs);
        push(&mut o, "pos_cap", &self.pos_cap);
        push(&mut o, "neg_ratio", &self.neg_ratio);
        o
    }
}

impl Overrides for DetectOpts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "scales", &self.scales);
        push(&mut o, "sigma", &self.sigma);
        o
    }
}

impl Overrides for BenchOpts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut o = Vec::new();
        push(&mut o, "tol", &self.tol);
        push(&mut o, "thresholds", &self.thresholds);
        push(&mut o, "matcher", &self.matcher);
        o
    }
}
