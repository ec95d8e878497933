use std::time::Instant;

use contour_core::convnet::{conv_forward, ConvWeights};
use contour_core::ImagePlane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct evaluation of the correlation sum with explicit zero padding.
fn naive(input: &ImagePlane, w: &ConvWeights, stride: usize, pad: usize) -> Vec<f64> {
    let (h, wd, c) = input.dims();
    let k = w.kernel();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = Vec::new();
    for oy in 0..oh {
        for ox in 0..ow {
            for o in 0..w.out_channels() {
                let mut acc = w.bias()[o] as f64;
                for ch in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * stride + ky) as i64 - pad as i64;
                            let x = (ox * stride + kx) as i64 - pad as i64;
                            if y < 0 || x < 0 || y >= h as i64 || x >= wd as i64 {
                                continue;
                            }
                            acc += input.get(y as usize, x as usize, ch) as f64
                                * w.weight(o, ch, ky, kx) as f64;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

#[test]
fn fifty_random_cases_match_direct_sum() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0;
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
        let weights = ConvWeights::new(out, c, k, kernel, bias).unwrap();

        let got = conv_forward(&input, &weights, stride, pad).unwrap();
        let want = naive(&input, &weights, stride, pad);
        assert_eq!(got.data().len(), want.len());
        for (g, w) in got.data().iter().zip(&want) {
            assert!((*g as f64 - w).abs() <= 1e-5, "case {cases}: {g} vs {w}");
        }
        cases += 1;
    }
    assert!(
        start.elapsed().as_secs_f64() < 1.0,
        "took {:?}",
        start.elapsed()
    );
}
