//! Seeded synthetic scenes with known boundaries.
//!
//! A scene is a textured background overlaid with a few flat-coloured
//! polygons and ellipses. Boundaries come from the label map sampled at
//! pixel centres: a pixel is marked when one of its 4-neighbours lies in a
//! shape further back. The first annotator sees the exact geometry; every
//! further annotator sees each shape displaced by up to
//! [`SynthConfig::jitter`] pixels.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bench::{zhang_suen, BinaryMap, GroundTruth};
use crate::error::{Error, Result};
use crate::image::ImagePlane;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    pub annotators: usize,
    pub jitter: f64,
    pub noise: f32,
    pub kinds: ShapeKinds,
}

/// Which outlines a scene may contain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShapeKinds {
    #[default]
    Mixed,
    Polygons,
    Ellipses,
    Circles,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            min_shapes: 1,
            max_shapes: 3,
            annotators: 3,
            jitter: 1.0,
            noise: 0.02,
            kinds: ShapeKinds::Mixed,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.height < 8 || self.width < 8 {
            return Err(Error::contract("synthetic scenes need at least 8x8 pixels"));
        }
        if self.min_shapes == 0 || self.min_shapes > self.max_shapes {
            return Err(Error::contract("need 1 <= min_shapes <= max_shapes"));
        }
        if self.annotators == 0 {
            return Err(Error::contract("need at least one annotator"));
        }
        if !(self.jitter >= 0.0 && self.noise >= 0.0) {
            return Err(Error::contract("jitter and noise must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Geometry {
    /// Vertices in (y, x), counter-clockwise around the centroid.
    Polygon(Vec<(f64, f64)>),
    Ellipse {
        cy: f64,
        cx: f64,
        ry: f64,
        rx: f64,
        angle: f64,
    },
}

impl Geometry {
    fn contains(&self, y: f64, x: f64) -> bool {
        match self {
            Geometry::Polygon(v) => {
                // even-odd rule
                let mut inside = false;
                let n = v.len();
                for i in 0..n {
                    let (yi, xi) = v[i];
                    let (yj, xj) = v[(i + n - 1) % n];
                    if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
            Geometry::Ellipse {
                cy,
                cx,
                ry,
                rx,
                angle,
            } => {
                let (dy, dx) = (y - cy, x - cx);
                let (s, c) = angle.sin_cos();
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
        }
    }

    /// Analytic outline length (Ramanujan's approximation for ellipses).
    fn perimeter(&self) -> f64 {
        match self {
            Geometry::Polygon(v) => (0..v.len())
                .map(|i| {
                    let (a, b) = (v[i], v[(i + 1) % v.len()]);
                    (a.0 - b.0).hypot(a.1 - b.1)
                })
                .sum(),
            Geometry::Ellipse { ry, rx, .. } => {
                let h = ((rx - ry) / (rx + ry)).powi(2);
                PI * (rx + ry) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
            }
        }
    }

    fn shifted(&self, oy: f64, ox: f64) -> Self {
        match self {
            Geometry::Polygon(v) => {
                Geometry::Polygon(v.iter().map(|&(y, x)| (y + oy, x + ox)).collect())
            }
            Geometry::Ellipse {
                cy,
                cx,
                ry,
                rx,
                angle,
            } => Geometry::Ellipse {
                cy: cy + oy,
                cx: cx + ox,
                ry: *ry,
                rx: *rx,
                angle: *angle,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Shape {
    geometry: Geometry,
    color: [f32; 3],
}

/// One generated scene: an RGB image in `[0, 1]` and its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub image: ImagePlane,
    pub ground_truth: GroundTruth,
    /// Summed analytic perimeter of every shape, ignoring occlusion.
    pub outline_length: f64,
}

fn luminance(c: &[f32; 3]) -> f32 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn random_color<R: Rng>(rng: &mut R, avoid: f32) -> [f32; 3] {
    loop {
        let c = [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
        if (luminance(&c) - avoid).abs() >= 0.2 {
            return c;
        }
    }
}

fn random_geometry<R: Rng>(rng: &mut R, h: f64, w: f64, kinds: ShapeKinds) -> Geometry {
    let size = h.min(w);
    let cy = rng.gen_range(0.2 * h..0.8 * h);
    let cx = rng.gen_range(0.2 * w..0.8 * w);
    let r = rng.gen_range(0.1 * size..0.2 * size);
    let polygon = match kinds {
        ShapeKinds::Mixed => rng.gen_bool(0.5),
        ShapeKinds::Polygons => true,
        ShapeKinds::Ellipses | ShapeKinds::Circles => false,
    };
    if polygon {
        let n = rng.gen_range(3..=6);
        let mut angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * 2.0 * PI / n as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        Geometry::Polygon(
            angles
                .iter()
                .map(|a| {
                    let rr = r * rng.gen_range(0.7..1.0);
                    (cy + rr * a.sin(), cx + rr * a.cos())
                })
                .collect(),
        )
    } else {
        let ry = if kinds == ShapeKinds::Circles {
            r
        } else {
            r * rng.gen_range(0.5..1.0)
        };
        Geometry::Ellipse {
            cy,
            cx,
            ry,
            rx: r,
            angle: rng.gen_range(0.0..PI),
        }
    }
}

/// Index (1-based, 0 for background) of the front-most shape at each pixel
/// centre.
fn label_map(shapes: &[&Geometry], h: usize, w: usize) -> Vec<usize> {
    let mut labels = vec![0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            for (i, g) in shapes.iter().enumerate() {
                if g.contains(py, px) {
                    labels[y * w + x] = i + 1;
                }
            }
        }
    }
    labels
}

fn boundaries(labels: &[usize], h: usize, w: usize) -> BinaryMap {
    let mut map = BinaryMap::new(h, w);
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            let lower = |yy: usize, xx: usize| labels[yy * w + xx] < l;
            let marked = (y > 0 && lower(y - 1, x))
                || (y + 1 < h && lower(y + 1, x))
                || (x > 0 && lower(y, x - 1))
                || (x + 1 < w && lower(y, x + 1));
            map.set(y, x, marked);
        }
    }
    map
}

const SUPERSAMPLE: usize = 4;

/// Generates scene `index` of the dataset identified by `seed`.
pub fn generate(config: &SynthConfig, seed: u64, index: u64) -> Result<SynthScene> {
    config.validate()?;
    let (h, w) = (config.height, config.width);
    let mut rng = rng::stream(seed, "synth", index);

    let base = [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
    let waves: Vec<(f64, f64, f64, f32)> = (0..2)
        .map(|_| {
            let theta = rng.gen_range(0.0..PI);
            let period = rng.gen_range(6.0..20.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (theta, period, phase, rng.gen_range(0.02..0.06))
        })
        .collect();
    let count = rng.gen_range(config.min_shapes..=config.max_shapes);
    let shapes: Vec<Shape> = (0..count)
        .map(|_| Shape {
            geometry: random_geometry(&mut rng, h as f64, w as f64, config.kinds),
            color: random_color(&mut rng, luminance(&base)),
        })
        .collect();

    let texture = |y: f64, x: f64| -> f32 {
        waves
            .iter()
            .map(|&(t, p, ph, a)| {
                a * ((x * t.cos() + y * t.sin()) * 2.0 * PI / p + ph).sin() as f32
            })
            .sum()
    };
    let noise = Normal::new(0.0f32, config.noise.max(f32::MIN_POSITIVE)).expect("finite std");
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut image = ImagePlane::zeros(h, w, 3);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let py = y as f64 + (sy as f64 + 0.5) * step;
                    let px = x as f64 + (sx as f64 + 0.5) * step;
                    let color = shapes
                        .iter()
                        .rev()
                        .find(|s| s.geometry.contains(py, px))
                        .map_or(base, |s| s.color);
                    for (a, c) in acc.iter_mut().zip(color) {
                        *a += c;
                    }
                }
            }
            let t = texture(y as f64 + 0.5, x as f64 + 0.5);
            let n = (SUPERSAMPLE * SUPERSAMPLE) as f32;
            for (c, a) in acc.iter().enumerate() {
                let eps = if config.noise > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                image.set(y, x, c, (a / n + t + eps).clamp(0.0, 1.0));
            }
        }
    }

    let mut annotators = Vec::with_capacity(config.annotators);
    for k in 0..config.annotators {
        let geoms: Vec<Geometry> = shapes
            .iter()
            .map(|s| {
                if k == 0 || config.jitter == 0.0 {
                    s.geometry.clone()
                } else {
                    let j = config.jitter;
                    s.geometry
                        .shifted(rng.gen_range(-j..=j), rng.gen_range(-j..=j))
                }
            })
            .collect();
        let refs: Vec<&Geometry> = geoms.iter().collect();
        // thinned like benchmark detections, so a copy of the truth scores 1
        annotators.push(zhang_suen(&boundaries(&label_map(&refs, h, w), h, w)));
    }
    Ok(SynthScene {
        image,
        ground_truth: GroundTruth::new(annotators)?,
        outline_length: shapes.iter().map(|s| s.geometry.perimeter()).sum(),
    })
}
