//! Threshold-and-thin: binarize a soft edge map, then reduce it to a
//! one-pixel-wide skeleton with Zhang–Suen thinning.

use super::binary::BinaryMap;
use crate::error::{Error, Result};
use crate::image::ImagePlane;

/// Neighbours P2..P9, clockwise from north.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// Zhang–Suen thinning. Each iteration runs two sub-passes; a pass deletes,
/// in parallel, every pixel with 2–6 neighbours, exactly one 0→1 transition
/// around its ring and an open side facing south-east (first pass) or
/// north-west (second pass).
pub fn zhang_suen(map: &BinaryMap) -> BinaryMap {
    let mut img = map.clone();
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            doomed.clear();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if !img.get(y, x) {
                        continue;
                    }
                    let p: [bool; 8] =
                        RING.map(|(dy, dx)| img.get_signed(y as isize + dy, x as isize + dx));
                    let neighbours = p.iter().filter(|&&b| b).count();
                    if !(2..=6).contains(&neighbours) {
                        continue;
                    }
                    let transitions = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    if transitions != 1 {
                        continue;
                    }
                    // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
                    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
                    let open = if pass == 0 {
                        !(n && e && s) && !(e && s && w)
                    } else {
                        !(n && e && w) && !(n && s && w)
                    };
                    if open {
                        doomed.push((y, x));
                    }
                }
            }
            for &(y, x) in &doomed {
                img.set(y, x, false);
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            return img;
        }
    }
}

/// Binarizes at `v ≥ t` and thins the result.
pub fn threshold_and_thin(edge_map: &ImagePlane, t: f32) -> Result<BinaryMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::contract(format!("threshold {t} outside [0, 1]")));
    }
    Ok(zhang_suen(&BinaryMap::threshold(edge_map, t)?))
}
