//! Library-level criteria, each checked against an oracle written here.

use std::time::Instant;

use contour_core::bench::{
    correspond, default_thresholds, evaluate_image, summarize, BenchConfig, BinaryMap, GroundTruth,
    ImageTable, Matcher,
};
use contour_core::convnet::{conv_forward, forward_selected, ConvWeights, NetSpec, WeightBundle};
use contour_core::densefeat::{build_pyramid, stitch, stitch_aligned, unstitch};
use contour_core::edgesvm::{train_svm, Provenance, SvmConfig, TrainSet};
use contour_core::nms::{thin_edges, DEFAULT_SIGMA};
use contour_core::synth::{generate, SynthConfig};
use contour_core::ImagePlane;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn naive_conv(input: &ImagePlane, w: &ConvWeights, stride: usize, pad: usize) -> Vec<f64> {
    let (h, wd, c) = input.dims();
    let k = w.kernel();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = Vec::with_capacity(oh * ow * w.out_channels());
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..w.out_channels() {
                let mut acc = w.bias()[o] as f64;
                for ch in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * stride + ky) as i64 - pad as i64;
                            let x = (ox * stride + kx) as i64 - pad as i64;
                            if (0..h as i64).contains(&y) && (0..wd as i64).contains(&x) {
                                acc += input.get(y as usize, x as usize, ch) as f64
                                    * w.weight(o, ch, ky, kx) as f64;
                            }
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn conv_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cases, mut worst) = (0, 0f64);
    while cases < 50 {
        let k = [1, 3, 5][rng.gen_range(0..3)];
        let stride = [1, 2, 4][rng.gen_range(0..3)];
        let pad = rng.gen_range(0..=2);
        let (h, w) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        if h + 2 * pad < k || w + 2 * pad < k {
            continue;
        }
        let (c, out) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let input = ImagePlane::from_fn(h, w, c, |_, _, _| rng.gen_range(-1.0..1.0));
        let kernel = (0..out * c * k * k)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let bias = (0..out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights = ConvWeights::new(out, c, k, kernel, bias).map_err(|e| e.to_string())?;
        let got = conv_forward(&input, &weights, stride, pad).map_err(|e| e.to_string())?;
        let want = naive_conv(&input, &weights, stride, pad);
        ensure(got.data().len() == want.len(), || {
            format!("case {cases}: output size")
        })?;
        for (g, w) in got.data().iter().zip(&want) {
            worst = worst.max((*g as f64 - w).abs());
        }
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-5, || format!("max error {worst:e}"))?;
    ensure(secs < 1.0, || format!("took {secs:.3}s"))?;
    Ok(format!("50 cases, max error {worst:.1e}, {secs:.3}s"))
}

pub fn geometry() -> Outcome {
    let net = NetSpec::alexnet();
    let s1 = net.tap_stride("Conv1").map_err(|e| e.to_string())?;
    let s2 = net.tap_stride("Conv2").map_err(|e| e.to_string())?;
    let widths = net
        .tap_names()
        .iter()
        .map(|t| net.tap_channels(t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let total: usize = widths.iter().sum();
    ensure(s1 == 4 && s2 == 8, || format!("strides {s1}, {s2}"))?;
    ensure(widths == [96, 256, 384, 384, 256], || {
        format!("widths {widths:?}")
    })?;
    ensure(total == 1376, || format!("sum {total}"))?;
    Ok(format!(
        "strides {s1}, {s2}; channels {widths:?} sum {total}"
    ))
}

fn interior_agreement(
    net: &NetSpec,
    weights: &WeightBundle,
    tap: &str,
    size: usize,
) -> Result<(usize, f64), String> {
    let e = |e: contour_core::Error| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let image = ImagePlane::from_fn(size, size, 3, |_, _, _| rng.gen());
    let taps = vec![tap.to_string()];
    let pyramid = build_pyramid(&image, &[1.0, 0.5]).map_err(e)?;
    let last = net.last_layer_for(&taps).map_err(e)?;
    let radius = net.receptive_field_radius(last);
    let gutter = net.default_gutter(&taps).map_err(e)?;
    ensure(gutter >= radius, || {
        format!("gutter {gutter} below radius {radius}")
    })?;
    let (stitched, layout) = stitch_aligned(&pyramid, gutter, net.max_stride(last)).map_err(e)?;
    let joint = forward_selected(&stitched, net, weights, &taps).map_err(e)?;
    let stride = joint[0].stride;
    let tiles = unstitch(&joint[0].map, &layout, stride).map_err(e)?;

    let (mut total, mut agree) = (0usize, 0usize);
    for (plane, tile) in pyramid.iter().zip(&tiles) {
        let alone = &forward_selected(plane, net, weights, &taps).map_err(e)?[0].map;
        ensure(alone.dims() == tile.dims(), || "tile dims differ".into())?;
        let interior =
            |i: usize, n: usize| i * stride >= radius + stride && (i + 1) * stride + radius <= n;
        for y in (0..tile.height()).filter(|&y| interior(y, plane.height())) {
            for x in (0..tile.width()).filter(|&x| interior(x, plane.width())) {
                total += 1;
                agree += tile
                    .pixel(y, x)
                    .iter()
                    .zip(alone.pixel(y, x))
                    .all(|(a, b)| (a - b).abs() <= 1e-4) as usize;
            }
        }
    }
    Ok((total, agree as f64 / total.max(1) as f64))
}

pub fn stitching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..100 {
        let channels = rng.gen_range(1..=3);
        let gutter = rng.gen_range(0..=4);
        let planes: Vec<_> = (0..rng.gen_range(1..=5))
            .map(|_| {
                let (h, w) = (rng.gen_range(1..=20), rng.gen_range(1..=20));
                ImagePlane::from_fn(h, w, channels, |_, _, _| rng.gen())
            })
            .collect();
        let (stitched, layout) = stitch(&planes, gutter).map_err(|e| e.to_string())?;
        let back = unstitch(&stitched, &layout, 1).map_err(|e| e.to_string())?;
        ensure(back == planes, || format!("round trip {case} differs"))?;
    }
    let alex = NetSpec::alexnet();
    let (n1, f1) = interior_agreement(&alex, &WeightBundle::random(&alex, 1), "Conv1", 64)?;
    let desk = NetSpec::desk();
    let (n2, f2) = interior_agreement(&desk, &WeightBundle::random(&desk, 2), "Conv5", 128)?;
    ensure(n1 > 50 && n2 > 50, || {
        format!("too few interior pixels ({n1}, {n2})")
    })?;
    ensure(f1 >= 0.99 && f2 >= 0.99, || {
        format!("agreement {f1:.4}, {f2:.4}")
    })?;
    Ok(format!(
        "100 exact round trips; stride-4 interior agreement {:.2}% (AlexNet Conv1, {n1} px), {:.2}% (desk Conv5, {n2} px)",
        100.0 * f1,
        100.0 * f2
    ))
}

fn svm_instance(seed: u64, n: usize) -> TrainSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = TrainSet::new(2);
    for i in 0..n {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let x = [
            0.8 * y as f32 + rng.gen_range(-1.7f32..1.7),
            0.5 * y as f32 + rng.gen_range(-3.4f32..3.4) + 3.0,
        ];
        set.push(
            &x,
            y,
            Provenance {
                image: 0,
                y: 0,
                x: i,
            },
        )
        .expect("2-d sample");
    }
    set
}

fn standardized(set: &TrainSet) -> Vec<([f64; 2], f64)> {
    let n = set.len() as f64;
    let mut mean = [0.0; 2];
    let mut var = [0.0; 2];
    for i in 0..set.len() {
        for (m, v) in mean.iter_mut().zip(set.sample(i)) {
            *m += *v as f64 / n;
        }
    }
    for i in 0..set.len() {
        for d in 0..2 {
            var[d] += (set.sample(i)[d] as f64 - mean[d]).powi(2) / n;
        }
    }
    (0..set.len())
        .map(|i| {
            let s = set.sample(i);
            let z = |d: usize| (s[d] as f64 - mean[d]) / var[d].sqrt();
            ([z(0), z(1)], set.label(i) as f64)
        })
        .collect()
}

fn svm_objective(pts: &[([f64; 2], f64)], lambda: f64, p: [f64; 3]) -> f64 {
    let hinge: f64 = pts
        .iter()
        .map(|(x, y)| (1.0 - y * (p[0] * x[0] + p[1] * x[1] + p[2])).max(0.0))
        .sum();
    0.5 * lambda * (p[0] * p[0] + p[1] * p[1]) + hinge / pts.len() as f64
}

/// Brute-force minimum over a grid that is refined around the best point.
fn grid_minimum(pts: &[([f64; 2], f64)], lambda: f64) -> f64 {
    let steps = 40;
    let (mut center, mut half) = ([0.0f64; 3], [4.0f64, 4.0, 6.0]);
    let mut best = f64::INFINITY;
    for _ in 0..12 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let at = |d: usize, t: usize| {
                        center[d] - half[d] + 2.0 * half[d] * t as f64 / steps as f64
                    };
                    let p = [at(0, i), at(1, j), at(2, k)];
                    let v = svm_objective(pts, lambda, p);
                    if v < best {
                        best = v;
                        arg = p;
                    }
                }
            }
        }
        center = arg;
        half = half.map(|h| h * 8.0 / steps as f64);
    }
    best
}

pub fn svm() -> Outcome {
    let lambda = 0.1;
    let mut worst = 0f64;
    for seed in 0..20 {
        let set = svm_instance(seed, 20);
        let model = train_svm(
            &set,
            &SvmConfig {
                lambda,
                epochs: 2000,
                seed,
            },
        )
        .map_err(|e| e.to_string())?
        .model;
        let got = model.objective(&set);
        let oracle = grid_minimum(&standardized(&set), lambda);
        worst = worst.max(got / oracle - 1.0);
    }
    ensure(worst <= 0.01, || format!("worst gap {:.3}%", 100.0 * worst))?;

    let mut sep = TrainSet::new(1);
    for i in 0..20 {
        let (x, y) = if i < 10 {
            (-1.1 - 0.2 * i as f32, -1)
        } else {
            (1.1 + 0.2 * (i - 10) as f32, 1)
        };
        sep.push(
            &[x],
            y,
            Provenance {
                image: 0,
                y: 0,
                x: i,
            },
        )
        .map_err(|e| e.to_string())?;
    }
    let model = train_svm(
        &sep,
        &SvmConfig {
            lambda: 1e-3,
            epochs: 50,
            seed: 3,
        },
    )
    .map_err(|e| e.to_string())?
    .model;
    let correct = (0..sep.len())
        .filter(|&i| model.predict(sep.sample(i)) == sep.label(i))
        .count();
    ensure(correct == sep.len(), || {
        format!("separable accuracy {correct}/{}", sep.len())
    })?;

    let mut dup_gap = 0f64;
    for seed in 0..5 {
        let set = svm_instance(100 + seed, 20);
        let mut doubled = set.clone();
        doubled.extend(&set).map_err(|e| e.to_string())?;
        let m = train_svm(
            &set,
            &SvmConfig {
                lambda,
                epochs: 50,
                seed,
            },
        )
        .map_err(|e| e.to_string())?
        .model;
        dup_gap = dup_gap.max((m.objective(&set) - m.objective(&doubled)).abs());
    }
    ensure(dup_gap <= 1e-6, || format!("duplicate gap {dup_gap:e}"))?;
    Ok(format!(
        "worst objective gap {:.3}% over 20 instances; separable accuracy 1.0; duplicate gap {dup_gap:.1e}",
        100.0 * worst
    ))
}

fn sparse(rng: &mut ChaCha8Rng, n: usize) -> BinaryMap {
    let mut m = BinaryMap::new(8, 8);
    for _ in 0..n {
        m.set(rng.gen_range(0..8), rng.gen_range(0..8), true);
    }
    m
}

/// Maximum bipartite matching by augmenting paths.
fn max_matching(det: &BinaryMap, gt: &BinaryMap, max_dist: f64) -> usize {
    let (d, g) = (det.pixels(), gt.pixels());
    let adj: Vec<Vec<usize>> = d
        .iter()
        .map(|&(y, x)| {
            (0..g.len())
                .filter(|&j| (y as f64 - g[j].0 as f64).hypot(x as f64 - g[j].1 as f64) <= max_dist)
                .collect()
        })
        .collect();
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; g.len()];
    (0..d.len())
        .filter(|&u| augment(u, &adj, &mut vec![false; g.len()], &mut owner))
        .count()
}

pub fn matching_trials() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ties = 0;
    for trial in 0..200 {
        let (nd, ng) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let det = sparse(&mut rng, nd);
        let gt = sparse(&mut rng, ng);
        let oracle = max_matching(&det, &gt, 1.5);
        let greedy = correspond(&det, &gt, 1.5, Matcher::Greedy).map_err(|e| e.to_string())?;
        let exact = correspond(&det, &gt, 1.5, Matcher::Exact).map_err(|e| e.to_string())?;
        ensure(greedy.matched_det <= oracle, || {
            format!("trial {trial}: greedy above oracle")
        })?;
        ensure(exact.matched_det == oracle, || {
            format!("trial {trial}: exact misses oracle")
        })?;
        ties += (greedy.matched_det == oracle) as usize;
    }
    ensure(ties >= 190, || format!("greedy equal in {ties}/200"))?;
    Ok(format!("greedy ≤ oracle in 200/200, equal in {ties}/200"))
}

fn scenes(n: u64, annotators: usize) -> Vec<GroundTruth> {
    let cfg = SynthConfig {
        annotators,
        ..SynthConfig::default()
    };
    (0..n)
        .map(|i| generate(&cfg, 17, i).expect("synthetic scene").ground_truth)
        .collect()
}

fn noisy_map(gt: &GroundTruth, seed: u64) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = gt.consensus();
    let (h, w) = gt.dims();
    ImagePlane::from_fn(h, w, 1, |y, x, _| {
        (0.6 * c.get(y, x, 0) + 0.4 * rng.gen::<f32>()).min(1.0)
    })
}

fn tables(maps: &[ImagePlane], gts: &[GroundTruth]) -> Result<Vec<ImageTable>, String> {
    let t = default_thresholds(99);
    maps.iter()
        .zip(gts)
        .map(|(m, g)| evaluate_image(m, g, &t, &BenchConfig::default()).map_err(|e| e.to_string()))
        .collect()
}

pub fn bench_identities() -> Outcome {
    let e = |e: contour_core::Error| e.to_string();
    let mut worst_single = 0f64;
    for (i, gt) in scenes(4, 3).into_iter().enumerate() {
        let map = noisy_map(&gt, i as u64);
        let r = summarize(&tables(&[map], &[gt])?).map_err(e)?;
        worst_single = worst_single.max((r.ois - r.ods).abs());
    }
    ensure(worst_single <= 1e-12, || {
        format!("single-image |OIS-ODS| {worst_single:e}")
    })?;

    let gts = scenes(4, 1);
    let perfect: Vec<_> = gts.iter().map(|g| g.annotators()[0].to_plane()).collect();
    let r = summarize(&tables(&perfect, &gts)?).map_err(e)?;
    for v in [r.ods, r.ois, r.ap] {
        ensure((v - 1.0).abs() <= 1e-9, || {
            format!("perfect detector scored {v}")
        })?;
    }

    let gts = scenes(3, 3);
    let empty: Vec<_> = gts
        .iter()
        .map(|g| ImagePlane::zeros(g.dims().0, g.dims().1, 1))
        .collect();
    let r = summarize(&tables(&empty, &gts)?).map_err(e)?;
    ensure(r.pr_curve.iter().all(|p| p.recall == 0.0), || {
        "empty detector has recall".into()
    })?;

    let gts = scenes(6, 3);
    let maps: Vec<_> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| noisy_map(g, 50 + i as u64))
        .collect();
    let base = summarize(&tables(&maps, &gts)?).map_err(e)?.summary_tsv();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let mut order: Vec<usize> = (0..maps.len()).collect();
        order.shuffle(&mut rng);
        let m: Vec<_> = order.iter().map(|&i| maps[i].clone()).collect();
        let g: Vec<_> = order.iter().map(|&i| gts[i].clone()).collect();
        let s = summarize(&tables(&m, &g)?).map_err(e)?.summary_tsv();
        ensure(s == base, || "permuted summary differs".into())?;
    }
    Ok(format!(
        "|OIS-ODS| {worst_single:.0e} on single images; perfect = 1; empty recall 0; permutations byte-identical"
    ))
}

fn ridge(theta: f64, cy: f64, cx: f64) -> ImagePlane {
    let (s, c) = theta.sin_cos();
    ImagePlane::from_fn(48, 48, 1, |y, x, _| {
        let d = (x as f64 - cx) * s - (y as f64 - cy) * c;
        (-d * d / (2.0 * 1.5 * 1.5)).exp() as f32
    })
}

/// Retained pixels per unit ridge length over the central 25 px.
fn ridge_width(thinned: &ImagePlane, theta: f64, cy: f64, cx: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let mut area = 0;
    for y in 0..48 {
        for x in 0..48 {
            let along = (x as f64 - cx) * c + (y as f64 - cy) * s;
            area += (along.abs() <= 12.0 && thinned.get(y, x, 0) > 0.0) as usize;
        }
    }
    area as f64 / 25.0
}

pub fn nms() -> Outcome {
    let mut worst = 0f64;
    for k in 0..4 {
        let theta = k as f64 * std::f64::consts::FRAC_PI_4;
        for offset in [0.0, 0.2, 0.35] {
            let (cy, cx) = (24.0 + offset, 24.0 - offset / 2.0);
            let thinned =
                thin_edges(&ridge(theta, cy, cx), DEFAULT_SIGMA).map_err(|e| e.to_string())?;
            let w = ridge_width(&thinned, theta, cy, cx);
            ensure(w > 0.5, || format!("theta {theta:.3}: ridge lost"))?;
            worst = worst.max(w);
        }
    }
    ensure(worst <= 1.5, || format!("widest ridge {worst:.3} px"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let map = ImagePlane::from_fn(24, 24, 1, |_, _, _| rng.gen());
        let thinned = thin_edges(&map, DEFAULT_SIGMA).map_err(|e| e.to_string())?;
        let grew = thinned.data().iter().zip(map.data()).any(|(t, m)| t > m);
        ensure(!grew, || "suppression increased a value".into())?;
    }
    Ok(format!(
        "widest mean ridge {worst:.2} px over 4 orientations; no value increased"
    ))
}
