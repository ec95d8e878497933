//! One-to-one correspondence between detected and ground-truth boundary
//! pixels within a distance tolerance.
//!
//! [`Matcher::Greedy`] accepts candidate pairs in order of increasing
//! distance. [`Matcher::Exact`] solves the assignment problem per connected
//! component of the candidate graph, maximizing the number of matches and
//! then minimizing their total distance.

use super::binary::BinaryMap;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Matcher {
    #[default]
    Greedy,
    Exact,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub matched_det: usize,
    pub matched_gt: usize,
    /// Detected pixels that found a partner.
    pub det_matched: BinaryMap,
    /// `(det, gt)` pixel pairs.
    pub pairs: Vec<((usize, usize), (usize, usize))>,
}

/// A candidate pair: squared distance, detection index, ground-truth index.
type Candidate = (usize, usize, usize);

fn candidates(
    det: &[(usize, usize)],
    gt: &BinaryMap,
    gt_index: &[usize],
    max_dist: f64,
) -> Vec<Candidate> {
    let r = max_dist.floor() as isize;
    let r2 = max_dist * max_dist;
    let mut out = Vec::new();
    for (di, &(y, x)) in det.iter().enumerate() {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dy * dy + dx * dx) as usize;
                if d2 as f64 > r2 {
                    continue;
                }
                let (ny, nx) = (y as isize + dy, x as isize + dx);
                if gt.get_signed(ny, nx) {
                    out.push((d2, di, gt_index[ny as usize * gt.width() + nx as usize]));
                }
            }
        }
    }
    out
}

/// Matches detected pixels to ground-truth pixels at most `max_dist` apart.
pub fn correspond(
    det: &BinaryMap,
    gt: &BinaryMap,
    max_dist: f64,
    matcher: Matcher,
) -> Result<Correspondence> {
    if det.dims() != gt.dims() {
        return Err(Error::shape(format!(
            "detection {:?} and ground truth {:?} differ in size",
            det.dims(),
            gt.dims()
        )));
    }
    if !(max_dist.is_finite() && max_dist >= 0.0) {
        return Err(Error::contract(format!(
            "invalid match distance {max_dist}"
        )));
    }
    let det_px = det.pixels();
    let gt_px = gt.pixels();
    let mut gt_index = vec![usize::MAX; gt.height() * gt.width()];
    for (i, &(y, x)) in gt_px.iter().enumerate() {
        gt_index[y * gt.width() + x] = i;
    }
    let mut cands = candidates(&det_px, gt, &gt_index, max_dist);
    let assignment = match matcher {
        Matcher::Greedy => greedy(&mut cands, det_px.len(), gt_px.len()),
        Matcher::Exact => exact(&cands, det_px.len(), gt_px.len()),
    };

    let mut det_matched = BinaryMap::new(det.height(), det.width());
    let mut pairs = Vec::with_capacity(assignment.len());
    for &(di, gi) in &assignment {
        let d = det_px[di];
        det_matched.set(d.0, d.1, true);
        pairs.push((d, gt_px[gi]));
    }
    Ok(Correspondence {
        matched_det: assignment.len(),
        matched_gt: assignment.len(),
        det_matched,
        pairs,
    })
}

fn greedy(cands: &mut [Candidate], n_det: usize, n_gt: usize) -> Vec<(usize, usize)> {
    cands.sort_unstable();
    let mut det_used = vec![false; n_det];
    let mut gt_used = vec![false; n_gt];
    let mut out = Vec::new();
    for &(_, di, gi) in cands.iter() {
        if !det_used[di] && !gt_used[gi] {
            det_used[di] = true;
            gt_used[gi] = true;
            out.push((di, gi));
        }
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn exact(cands: &[Candidate], n_det: usize, n_gt: usize) -> Vec<(usize, usize)> {
    // union-find over det nodes 0..n_det and gt nodes n_det..n_det+n_gt
    let mut parent: Vec<usize> = (0..n_det + n_gt).collect();
    for &(_, di, gi) in cands {
        let (a, b) = (find(&mut parent, di), find(&mut parent, n_det + gi));
        if a != b {
            parent[a] = b;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Candidate>> = Default::default();
    for &c in cands {
        let root = find(&mut parent, c.1);
        groups.entry(root).or_default().push(c);
    }

    let mut out = Vec::new();
    for edges in groups.values() {
        let mut dets: Vec<usize> = edges.iter().map(|e| e.1).collect();
        let mut gts: Vec<usize> = edges.iter().map(|e| e.2).collect();
        dets.sort_unstable();
        dets.dedup();
        gts.sort_unstable();
        gts.dedup();
        for (a, b) in solve_component(&dets, &gts, edges) {
            out.push((dets[a], gts[b]));
        }
    }
    out.sort_unstable();
    out
}

/// Min-cost assignment on the augmented square matrix
///
/// ```text
///            gt_j            det-dummy_i'
/// det_i    [ dist | ∞ ]    [ M if i = i' else ∞ ]
/// gt-dummy [ M if j = j' else ∞ ]   [ 0 ]
/// ```
///
/// where `M` exceeds any achievable total distance, so the optimum first
/// maximizes the match count and then minimizes distance.
fn solve_component(dets: &[usize], gts: &[usize], edges: &[Candidate]) -> Vec<(usize, usize)> {
    let (nd, ng) = (dets.len(), gts.len());
    let n = nd + ng;
    let max_edge = edges
        .iter()
        .map(|e| (e.0 as f64).sqrt())
        .fold(0.0, f64::max);
    let unmatched = (n as f64) * (max_edge + 1.0) + 1.0;
    let forbidden = unmatched * (n as f64 + 1.0) * 4.0;
    let mut cost = vec![vec![forbidden; n]; n];
    for &(d2, di, gi) in edges {
        let a = dets.binary_search(&di).expect("det in component");
        let b = gts.binary_search(&gi).expect("gt in component");
        cost[a][b] = (d2 as f64).sqrt();
    }
    for i in 0..nd {
        cost[i][ng + i] = unmatched;
    }
    for j in 0..ng {
        cost[nd + j][j] = unmatched;
        for k in 0..nd {
            cost[nd + j][ng + k] = 0.0;
        }
    }
    let assignment = hungarian(&cost);
    (0..nd)
        .filter_map(|a| {
            let b = assignment[a];
            (b < ng && cost[a][b] < unmatched).then_some((a, b))
        })
        .collect()
}

/// Dense O(n³) Hungarian algorithm with potentials; returns the column
/// assigned to each row of a square cost matrix.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}
