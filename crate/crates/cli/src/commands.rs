//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use contour_core::bench::format_table;
use contour_core::edgesvm::EdgeModel;
use contour_core::synth::{self, SynthConfig};
use contour_core::{pnm, tensor};
use rayon::prelude::*;

use crate::args::{AblateArgs, Common, DetectArgs, EvalArgs, Overrides, SynthArgs, TrainArgs};
use crate::config::RunConfig;
use crate::dataset::{self, Example};
use crate::error::{CliError, Result};
use crate::pipeline::{self, Extractor};

/// Defaults, then the `--config` file, then explicit flags.
fn build_config(
    common: &Common,
    data: Option<&PathBuf>,
    groups: &[&dyn Overrides],
) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    let flags = groups
        .iter()
        .flat_map(|g| g.overrides())
        .chain(common.overrides());
    for (key, value) in flags {
        config.set(key, &value).map_err(CliError::Usage)?;
    }
    if let Some(d) = data {
        config.data = Some(d.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Runs `f` on a pool of `jobs` threads (0 for one per core).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(f)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::File {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn split_id(split: &str, i: usize) -> String {
    format!("{split}_{i:04}")
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let config = build_config(&args.common, None, &[])?;
    if args.size < 16 {
        return Err(CliError::Usage("--size must be at least 16".into()));
    }
    if args.n_train == 0 || args.n_test == 0 {
        return Err(CliError::Usage(
            "--n-train and --n-test must be at least 1".into(),
        ));
    }
    if !(1..=3).contains(&args.annotators) {
        return Err(CliError::Usage("--annotators must be 1, 2 or 3".into()));
    }
    let scene_config = SynthConfig {
        height: args.size,
        width: args.size,
        annotators: args.annotators,
        ..SynthConfig::default()
    };
    let splits = [
        ("train", args.n_train, 0u64),
        ("val", args.n_val, 1 << 32),
        ("test", args.n_test, 2 << 32),
    ];
    with_jobs(config.jobs, || {
        for (split, n, base) in splits {
            (0..n).into_par_iter().try_for_each(|i| {
                let scene = synth::generate(&scene_config, config.seed, base + i as u64)?;
                dataset::write_scene(&args.out, split, &split_id(split, i), &scene)
            })?;
        }
        Ok(())
    })?;
    println!(
        "wrote {} train, {} val, {} test images to {}",
        args.n_train,
        args.n_val,
        args.n_test,
        args.out.display()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let config = build_config(
        &args.common,
        args.data.as_ref(),
        &[&args.net, &args.taps, &args.svm],
    )?;
    let outcome = with_jobs(config.jobs, || {
        let extractor = Extractor::from_config(&config)?;
        let taps = extractor.taps(&config)?;
        let examples = dataset::load_split(config.data_root()?, &args.split)?;
        pipeline::train(&examples, &extractor, &taps, &config)
    })?;
    if let Some(parent) = args.model.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    outcome
        .model
        .write(&args.model)
        .map_err(|source| CliError::File {
            path: args.model.clone(),
            source,
        })?;
    write_text(
        &log_path(&args.model),
        &pipeline::training_log(&outcome.epoch_objectives),
    )?;
    println!(
        "trained on {} samples ({} images skipped); final objective {:.6}",
        outcome.samples,
        outcome.skipped.len(),
        outcome.epoch_objectives.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn log_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let config = build_config(&args.common, None, &[&args.net, &args.detect])?;
    let model = EdgeModel::read(&args.model).map_err(|source| CliError::File {
        path: args.model.clone(),
        source,
    })?;
    let inputs = dataset::expand_inputs(&args.inputs)?;
    if inputs.is_empty() {
        return Err(CliError::Usage("no input images".into()));
    }
    fs::create_dir_all(&args.out)?;
    if let Some(dir) = &args.features {
        fs::create_dir_all(dir)?;
    }
    with_jobs(config.jobs, || {
        let extractor = Extractor::from_config(&config)?;
        inputs.par_iter().try_for_each(|path| {
            let image = dataset::read_image(path)?;
            if let Some(dir) = &args.features {
                let field = pipeline::features_one(&image, &extractor, &model)?;
                let out = dir.join(format!("{}.pxf", dataset::file_id(path)));
                tensor::write_plane(field.as_plane(), &out)
                    .map_err(|source| CliError::File { path: out, source })?;
            }
            let map = pipeline::detect_one(&image, &extractor, &model, &config, !args.no_nms)?;
            let out = args.out.join(format!("{}.pgm", dataset::file_id(path)));
            pnm::write_edge_map(&map, &out).map_err(|source| CliError::File { path: out, source })
        })
    })?;
    println!("wrote {} edge maps to {}", inputs.len(), args.out.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let config = build_config(&args.common, args.data.as_ref(), &[&args.bench])?;
    let report = with_jobs(config.jobs, || {
        let root = config.data_root()?;
        let ids = dataset::split_ids(root, &args.split)?;
        if ids.is_empty() {
            return Err(CliError::Usage(format!(
                "split {} has no images",
                args.split
            )));
        }
        let loaded = ids
            .par_iter()
            .map(|id| {
                let gt = dataset::read_ground_truth(root, &args.split, id)?;
                let edges = dataset::read_image(&args.edges.join(format!("{id}.pgm")))?;
                Ok((edges, gt))
            })
            .collect::<Result<Vec<_>>>()?;
        let (edges, gts): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
        pipeline::evaluate(&edges, &gts.iter().collect::<Vec<_>>(), &config)
    })?;
    write_text(&args.out.join("pr.tsv"), &report.pr_tsv())?;
    write_text(&args.out.join("summary.tsv"), &report.summary_tsv())?;
    print!("{}", report.summary_tsv());
    Ok(())
}

/// Individual taps followed by all taps together. Nets tapped at
/// `Conv1..ConvN` label the combined column `Conv1-N`.
pub fn ablation_columns(tap_names: &[String]) -> Vec<(String, Vec<String>)> {
    let mut columns: Vec<(String, Vec<String>)> = tap_names
        .iter()
        .map(|t| (t.clone(), vec![t.clone()]))
        .collect();
    let numbered = tap_names
        .iter()
        .enumerate()
        .all(|(i, t)| *t == format!("Conv{}", i + 1));
    let label = if numbered && tap_names.len() > 1 {
        format!("Conv1-{}", tap_names.len())
    } else {
        "all".to_string()
    };
    columns.push((label, tap_names.to_vec()));
    columns
}

pub fn ablate(args: &AblateArgs) -> Result<()> {
    let config = build_config(
        &args.common,
        args.data.as_ref(),
        &[&args.net, &args.svm, &args.detect, &args.bench],
    )?;
    let table = with_jobs(config.jobs, || {
        let root = config.data_root()?;
        let extractor = Extractor::from_config(&config)?;
        let train_set = dataset::load_split(root, &args.train_split)?;
        let test_set = dataset::load_split(root, &args.test_split)?;
        let mut cells = Vec::new();
        for (label, taps) in ablation_columns(&extractor.net.tap_names()) {
            let report = ablate_column(&train_set, &test_set, &extractor, &taps, &config)?;
            let dir = args.out.join(&label);
            write_text(&dir.join("pr.tsv"), &report.pr_tsv())?;
            write_text(&dir.join("summary.tsv"), &report.summary_tsv())?;
            cells.push((label, [report.ods, report.ois, report.ap]));
        }
        Ok(format_table(&cells))
    })?;
    write_text(&args.out.join("table.tsv"), &table)?;
    print!("{table}");
    Ok(())
}

fn ablate_column(
    train_set: &[Example],
    test_set: &[Example],
    extractor: &Extractor,
    taps: &[String],
    config: &RunConfig,
) -> Result<contour_core::bench::BenchReport> {
    let outcome = pipeline::train(train_set, extractor, taps, config)?;
    let images: Vec<_> = test_set.iter().map(|e| &e.image).collect();
    let maps = pipeline::detect_all(&images, extractor, &outcome.model, config, true)?;
    // same rounding as a detect / eval round trip through 16-bit files
    let maps: Vec<_> = maps.iter().map(pipeline::quantize16).collect();
    let gts: Vec<_> = test_set.iter().map(|e| &e.gt).collect();
    pipeline::evaluate(&maps, &gts, config)
}
