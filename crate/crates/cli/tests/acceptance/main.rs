//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Library-level checks live in `kernels`; the rest drive the
//! `contour` binary end to end.

mod kernels;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use contour_core::bench::format_table;
use contour_core::convnet::{forward_taps, NetSpec, WeightBundle};
use contour_core::pnm::write_edge_map;
use contour_core::ImagePlane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kernels::Outcome;

const BIN: &str = env!("CARGO_BIN_EXE_contour");

fn contour(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`contour {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn read_summary(dir: &Path) -> Result<BTreeMap<String, f64>, String> {
    let text = std::fs::read_to_string(dir.join("summary.tsv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let keys: Vec<_> = lines.next().unwrap_or_default().split('\t').collect();
    let values: Vec<f64> = lines
        .next()
        .unwrap_or_default()
        .split('\t')
        .map(|v| v.parse().map_err(|_| format!("bad summary value {v:?}")))
        .collect::<Result<_, _>>()?;
    Ok(keys.into_iter().map(str::to_string).zip(values).collect())
}

/// Every file under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// train + detect + eval into `dir` with the given worker count.
fn pipeline_run(data: &Path, dir: &Path, jobs: &str) -> Result<(), String> {
    let model = dir.join("model.pxw");
    let edges = dir.join("edges");
    let report = dir.join("report");
    let images = data.join("test").join("images");
    contour(&[
        "train",
        "--data",
        p(data),
        "--model",
        p(&model),
        "--seed",
        "7",
        "--jobs",
        jobs,
    ])?;
    contour(&[
        "detect",
        "--model",
        p(&model),
        "--out",
        p(&edges),
        "--seed",
        "7",
        "--jobs",
        jobs,
        p(&images),
    ])?;
    contour(&[
        "eval",
        "--data",
        p(data),
        "--edges",
        p(&edges),
        "--out",
        p(&report),
        "--jobs",
        jobs,
    ])?;
    Ok(())
}

struct Shared {
    data: PathBuf,
    run_a: PathBuf,
}

fn end_to_end(work: &Path) -> Result<(String, Shared), String> {
    let start = Instant::now();
    let data = work.join("data");
    contour(&[
        "synth",
        "--out",
        p(&data),
        "--n-train",
        "50",
        "--n-test",
        "20",
        "--size",
        "64",
        "--seed",
        "7",
    ])?;
    let run_a = work.join("run_a");
    pipeline_run(&data, &run_a, "4")?;

    // uniform random scores, benchmarked the same way
    let baseline = work.join("baseline");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let images = data.join("test").join("images");
    let mut ids: Vec<_> = std::fs::read_dir(&images)
        .map_err(|e| e.to_string())?
        .map(|e| {
            e.unwrap()
                .path()
                .file_stem()
                .unwrap()
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    ids.sort();
    std::fs::create_dir_all(baseline.join("edges")).map_err(|e| e.to_string())?;
    for id in &ids {
        let map = ImagePlane::from_fn(64, 64, 1, |_, _, _| rng.gen());
        write_edge_map(&map, baseline.join("edges").join(format!("{id}.pgm")))
            .map_err(|e| e.to_string())?;
    }
    contour(&[
        "eval",
        "--data",
        p(&data),
        "--edges",
        p(&baseline.join("edges")),
        "--out",
        p(&baseline.join("report")),
    ])?;
    let secs = start.elapsed().as_secs_f64();

    let trained = read_summary(&run_a.join("report"))?["ods"];
    let random = read_summary(&baseline.join("report"))?["ods"];
    if trained < random + 0.2 {
        return Err(format!("ODS {trained:.3} vs random {random:.3}"));
    }
    if secs > 300.0 {
        return Err(format!("run took {secs:.1}s"));
    }
    Ok((
        format!(
            "ODS {trained:.3} vs uniform-random {random:.3} (margin {:.3}); {secs:.1}s",
            trained - random
        ),
        Shared { data, run_a },
    ))
}

fn determinism(shared: &Shared, work: &Path) -> Outcome {
    let reference = tree(&shared.run_a);
    for (name, jobs) in [("run_b", "1"), ("run_c", "4"), ("run_d", "3")] {
        let dir = work.join(name);
        pipeline_run(&shared.data, &dir, jobs)?;
        let other = tree(&dir);
        if other.keys().ne(reference.keys()) {
            return Err(format!("{name} wrote a different file set"));
        }
        if let Some(path) = reference.keys().find(|k| reference[*k] != other[*k]) {
            return Err(format!(
                "{} differs in {name} (--jobs {jobs})",
                path.display()
            ));
        }
    }
    Ok(format!(
        "{} files (model, log, edge maps, reports) byte-identical across 4 runs at --jobs 4, 1, 4, 3",
        reference.len()
    ))
}

fn matcher_swap(shared: &Shared, work: &Path) -> Outcome {
    let exact = work.join("report_exact");
    contour(&[
        "eval",
        "--data",
        p(&shared.data),
        "--edges",
        p(&shared.run_a.join("edges")),
        "--out",
        p(&exact),
        "--matcher",
        "exact",
    ])?;
    let g = read_summary(&shared.run_a.join("report"))?["ods"];
    let e = read_summary(&exact)?["ods"];
    if (g - e).abs() > 0.01 {
        return Err(format!("ODS greedy {g:.4} vs exact {e:.4}"));
    }
    Ok(format!("dataset ODS greedy {g:.4} vs exact {e:.4}"))
}

fn matching(shared: Option<&Shared>, work: &Path) -> Outcome {
    let trials = kernels::matching_trials()?;
    let swap = matcher_swap(shared.ok_or("end-to-end run unavailable")?, work)?;
    Ok(format!("{trials}; {swap}"))
}

/// Little-endian PXW1 writer, independent of the library's encoder.
fn export_pxw1(records: &[(String, Vec<u32>, Vec<f32>)]) -> Vec<u8> {
    let mut out = b"PXW1".to_vec();
    out.extend((records.len() as u32).to_le_bytes());
    for (name, dims, data) in records {
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend(b"PXF1");
        out.extend((dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend(d.to_le_bytes());
        }
        for v in data {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

fn alexnet_export(seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers: [(&str, u32, u32, u32); 5] = [
        ("conv1", 96, 3, 11),
        ("conv2", 256, 48, 5),
        ("conv3", 384, 256, 3),
        ("conv4", 384, 192, 3),
        ("conv5", 256, 192, 3),
    ];
    let mut records = Vec::new();
    for (name, out, inp, k) in layers {
        let fan_in = (inp * k * k) as f32;
        let n = (out * inp * k * k) as usize;
        let scale = (6.0 / fan_in).sqrt();
        let w = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let b = (0..out).map(|_| rng.gen_range(0.0..0.1)).collect();
        records.push((format!("{name}.weight"), vec![out, inp, k, k], w));
        records.push((format!("{name}.bias"), vec![out], b));
    }
    export_pxw1(&records)
}

fn ablate_table(shared: Option<&Shared>, work: &Path) -> Outcome {
    let cols = ["Conv1", "Conv2", "Conv3", "Conv4", "Conv5", "Conv1-5"];
    let published = [
        [0.627, 0.660, 0.625],
        [0.699, 0.718, 0.712],
        [0.655, 0.670, 0.619],
        [0.654, 0.667, 0.615],
        [0.604, 0.620, 0.546],
        [0.741, 0.759, 0.757],
    ];
    let cells: Vec<_> = cols
        .iter()
        .zip(published)
        .map(|(c, v)| (c.to_string(), v))
        .collect();
    let expected = "\tConv1\tConv2\tConv3\tConv4\tConv5\tConv1-5\n\
                    ODS\t.627\t.699\t.655\t.654\t.604\t.741\n\
                    OIS\t.660\t.718\t.670\t.667\t.620\t.759\n\
                    AP\t.625\t.712\t.619\t.615\t.546\t.757\n";
    if format_table(&cells) != expected {
        return Err(format!("formatter produced {:?}", format_table(&cells)));
    }

    let shared = shared.ok_or("end-to-end run unavailable")?;
    let out = work.join("ablate");
    contour(&[
        "ablate",
        "--data",
        p(&shared.data),
        "--out",
        p(&out),
        "--seed",
        "7",
    ])?;
    let table = std::fs::read_to_string(out.join("table.tsv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split('\t').collect()).collect();
    let header: Vec<&str> = std::iter::once("").chain(cols).collect();
    if rows.len() != 4 || rows[0] != header {
        return Err(format!("unexpected table layout {table:?}"));
    }
    for (row, label) in rows[1..].iter().zip(["ODS", "OIS", "AP"]) {
        if row.len() != 7 || row[0] != label {
            return Err(format!("bad row {row:?}"));
        }
        for cell in &row[1..] {
            let ok = (cell.len() == 4
                && cell.starts_with('.')
                && cell[1..].bytes().all(|b| b.is_ascii_digit()))
                || *cell == "1.000";
            if !ok {
                return Err(format!("bad cell {cell:?}"));
            }
        }
    }
    let combined: Vec<&str> = rows[1..].iter().map(|r| r[6]).collect();

    // externally exported AlexNet weights, loaded and run through the net
    let weights_path = work.join("alexnet.pxw");
    std::fs::write(&weights_path, alexnet_export(3)).map_err(|e| e.to_string())?;
    let net = NetSpec::alexnet();
    let weights = WeightBundle::read(&weights_path, &net).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let image = ImagePlane::from_fn(67, 67, 3, |_, _, _| rng.gen_range(-100.0..100.0));
    let taps = forward_taps(&image, &net, &weights).map_err(|e| e.to_string())?;
    let widths: Vec<usize> = taps.iter().map(|t| t.map.channels()).collect();
    if widths.iter().sum::<usize>() != 1376
        || taps
            .iter()
            .any(|t| t.map.data().iter().any(|v| !v.is_finite()))
    {
        return Err(format!(
            "forward pass with exported weights gave widths {widths:?}"
        ));
    }

    // and the same file through the command line
    let small = work.join("small");
    let alex = work.join("alex");
    contour(&[
        "synth",
        "--out",
        p(&small),
        "--n-train",
        "4",
        "--n-test",
        "2",
        "--seed",
        "9",
    ])?;
    let model = alex.join("model.pxw");
    let common = ["--net", "alexnet", "--weights", p(&weights_path)];
    contour(
        &[
            &[
                "train",
                "--data",
                p(&small),
                "--model",
                p(&model),
                "--epochs",
                "5",
            ][..],
            &common,
        ]
        .concat(),
    )?;
    contour(
        &[
            &[
                "detect",
                "--model",
                p(&model),
                "--out",
                p(&alex.join("edges")),
            ][..],
            &common,
            &[p(&small.join("test").join("images"))],
        ]
        .concat(),
    )?;
    contour(&[
        "eval",
        "--data",
        p(&small),
        "--edges",
        p(&alex.join("edges")),
        "--out",
        p(&alex.join("report")),
    ])?;

    Ok(format!(
        "formatter byte-exact on published values; synthetic table 6×3 (Conv1-5 column {}); exported AlexNet PXW1 loads, taps sum to 1376, train/detect/eval run",
        combined.join(" ")
    ))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let mut stdout = std::io::stdout();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let line = match outcome {
            Ok(detail) => format!("PASS [{n}] {name}: {detail}"),
            Err(why) => {
                failures += 1;
                format!("FAIL [{n}] {name}: {why}")
            }
        };
        writeln!(stdout, "{line}").unwrap();
        stdout.flush().unwrap();
    };
    let guarded = |f: &dyn Fn() -> Outcome| {
        catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        })
    };

    let e2e = guarded(&|| end_to_end(work.path()).map(|(line, _)| line));
    let shared = e2e.is_ok().then(|| Shared {
        data: work.path().join("data"),
        run_a: work.path().join("run_a"),
    });

    report(
        1,
        "ablation table and external weights",
        guarded(&|| ablate_table(shared.as_ref(), work.path())),
    );
    report(2, "convolution oracle", guarded(&kernels::conv_oracle));
    report(3, "AlexNet geometry", guarded(&kernels::geometry));
    report(4, "stitch / unstitch", guarded(&kernels::stitching));
    report(5, "SVM oracle", guarded(&kernels::svm));
    report(
        6,
        "matching",
        guarded(&|| matching(shared.as_ref(), work.path())),
    );
    report(
        7,
        "benchmark identities",
        guarded(&kernels::bench_identities),
    );
    report(8, "NMS thinness", guarded(&kernels::nms));
    report(9, "end-to-end vs random baseline", e2e);
    report(
        10,
        "determinism",
        guarded(&|| {
            determinism(
                shared.as_ref().ok_or("end-to-end run unavailable")?,
                work.path(),
            )
        }),
    );

    writeln!(stdout, "{} of 10 criteria passed", 10 - failures).unwrap();
    if failures > 0 {
        std::process::exit(1);
    }
}
