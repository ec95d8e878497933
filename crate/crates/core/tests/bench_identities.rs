use contour_core::bench::{
    default_thresholds, evaluate_image, summarize, BenchConfig, GroundTruth, ImageTable,
};
use contour_core::synth::{generate, SynthConfig};
use contour_core::ImagePlane;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenes(n: u64, annotators: usize) -> Vec<(ImagePlane, GroundTruth)> {
    let cfg = SynthConfig {
        annotators,
        ..SynthConfig::default()
    };
    (0..n)
        .map(|i| {
            let s = generate(&cfg, 31, i).unwrap();
            (s.image, s.ground_truth)
        })
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

fn tables(maps: &[ImagePlane], gts: &[GroundTruth]) -> Vec<ImageTable> {
    let t = default_thresholds(99);
    maps.iter()
        .zip(gts)
        .map(|(m, g)| evaluate_image(m, g, &t, &BenchConfig::default()).unwrap())
        .collect()
}

#[test]
fn single_image_ois_equals_ods() {
    for (i, (_, gt)) in scenes(5, 3).into_iter().enumerate() {
        let map = noisy_map(&gt, i as u64);
        let r = summarize(&tables(&[map], &[gt])).unwrap();
        assert!(
            (r.ois - r.ods).abs() <= 1e-12,
            "ois {} ods {}",
            r.ois,
            r.ods
        );
    }
}

#[test]
fn perfect_detector_scores_one() {
    let data = scenes(4, 1);
    let gts: Vec<_> = data.iter().map(|(_, g)| g.clone()).collect();
    let maps: Vec<_> = gts.iter().map(|g| g.annotators()[0].to_plane()).collect();
    let r = summarize(&tables(&maps, &gts)).unwrap();
    for v in [r.ods, r.ois, r.ap] {
        assert!((v - 1.0).abs() <= 1e-9, "{v}");
    }
}

#[test]
fn empty_detector_has_zero_recall_everywhere() {
    let data = scenes(3, 3);
    let gts: Vec<_> = data.iter().map(|(_, g)| g.clone()).collect();
    let maps: Vec<_> = gts
        .iter()
        .map(|g| ImagePlane::zeros(g.dims().0, g.dims().1, 1))
        .collect();
    let r = summarize(&tables(&maps, &gts)).unwrap();
    assert!(r.pr_curve.iter().all(|p| p.recall == 0.0));
    assert_eq!(r.ods, 0.0);
}

#[test]
fn image_order_does_not_change_the_summary() {
    let data = scenes(8, 3);
    let gts: Vec<_> = data.iter().map(|(_, g)| g.clone()).collect();
    let maps: Vec<_> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| noisy_map(g, 100 + i as u64))
        .collect();
    let base = summarize(&tables(&maps, &gts)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let mut order: Vec<usize> = (0..maps.len()).collect();
        order.shuffle(&mut rng);
        let m: Vec<_> = order.iter().map(|&i| maps[i].clone()).collect();
        let g: Vec<_> = order.iter().map(|&i| gts[i].clone()).collect();
        let r = summarize(&tables(&m, &g)).unwrap();
        assert_eq!(r.summary_tsv(), base.summary_tsv());
        assert_eq!(r.pr_tsv(), base.pr_tsv());
    }
}

#[test]
fn measures_lie_in_the_unit_interval() {
    let data = scenes(4, 3);
    let gts: Vec<_> = data.iter().map(|(_, g)| g.clone()).collect();
    let maps: Vec<_> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| noisy_map(g, i as u64))
        .collect();
    let r = summarize(&tables(&maps, &gts)).unwrap();
    for p in &r.pr_curve {
        for v in [p.precision, p.recall, p.f] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert!(r.ods <= r.ois + 1e-12);
}
