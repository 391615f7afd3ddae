//! Longest-common-subsequence alignment of quantized point sequences.

use crate::geo::{BBox, GeoPoint};
use crate::vectorizer::BoundaryFragment;

use super::{FragmentMatch, StitchParams};

/// Matched index pairs of one longest common subsequence of `a` and `b`.
///
/// Among optimal alignments the traceback keeps `a` as early as possible:
/// on ties it advances in `b`.
pub fn lcs_pairs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    // suffix table: t[i][j] = LCS(a[i..], b[j..])
    let w = m + 1;
    let mut t = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            t[i * w + j] = if a[i] == b[j] {
                t[(i + 1) * w + j + 1] + 1
            } else {
                t[(i + 1) * w + j].max(t[i * w + j + 1])
            };
        }
    }
    let mut out = Vec::with_capacity(t[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if t[i * w + j + 1] >= t[(i + 1) * w + j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_pairs(a, b).len()
}

/// Grid cell of `p` for cell size `cell` anchored at `origin`.
pub(crate) fn cell_of(p: &GeoPoint, origin: &GeoPoint, cell: f64) -> (i64, i64) {
    (
        ((p.lon - origin.lon) / cell).floor() as i64,
        ((p.lat - origin.lat) / cell).floor() as i64,
    )
}

/// Cell anchor for an overlap window. Shifting the grid a quarter cell off
/// the window corner keeps pixel corners and centres (which sit on
/// half-pixel multiples from a tile edge) away from cell boundaries.
pub(crate) fn anchor(window: &BBox, cell: f64) -> GeoPoint {
    GeoPoint::new(window.min_lon + 0.25 * cell, window.min_lat + 0.25 * cell)
}

/// Inserts a collinear point into every grid cell a segment crosses inside
/// `window`, so that nearby chains yield comparable cell sequences no matter
/// where their vertices were kept by simplification. Existing points are
/// kept as they are.
pub(crate) fn densify(pts: &[GeoPoint], window: &BBox, origin: &GeoPoint, cell: f64) -> Vec<GeoPoint> {
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        out.push(p);
        let seg = BBox {
            min_lon: p.lon.min(q.lon),
            min_lat: p.lat.min(q.lat),
            max_lon: p.lon.max(q.lon),
            max_lat: p.lat.max(q.lat),
        };
        if !seg.intersects(window) {
            continue;
        }
        let mut ts = vec![0.0, 1.0];
        for (a, b, o) in [(p.lon, q.lon, origin.lon), (p.lat, q.lat, origin.lat)] {
            if a == b {
                continue;
            }
            let (lo, hi) = (a.min(b), a.max(b));
            let mut k = ((lo - o) / cell).floor() + 1.0;
            while o + k * cell < hi {
                ts.push((o + k * cell - a) / (b - a));
                k += 1.0;
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        for t in ts.windows(2) {
            if t[0] == 0.0 && t[1] == 1.0 {
                break;
            }
            let m = 0.5 * (t[0] + t[1]);
            let x = GeoPoint::new(p.lon + m * (q.lon - p.lon), p.lat + m * (q.lat - p.lat));
            if window.contains_point(&x) && x != p && x != q {
                out.push(x);
            }
        }
    }
    if let Some(&last) = pts.last() {
        out.push(last);
    }
    out
}

/// Indices and cells of the points of `pts` inside `window`.
fn restricted(pts: &[GeoPoint], window: &BBox, origin: &GeoPoint, cell: f64) -> (Vec<usize>, Vec<(i64, i64)>) {
    pts.iter()
        .enumerate()
        .filter(|(_, p)| window.contains_point(p))
        .map(|(k, p)| (k, cell_of(p, origin, cell)))
        .unzip()
}

/// Open point run of a fragment: closed fragments drop the repeated
/// closing point.
pub(crate) fn open_points(f: &BoundaryFragment) -> &[GeoPoint] {
    if f.closed && f.points.len() > 1 {
        &f.points[..f.points.len() - 1]
    } else {
        &f.points
    }
}

/// Aligns two point chains inside `overlap` (grown by `join_tol`).
/// With `try_reverse`, `b` is also tried backwards; indices of a reversed
/// match refer to the reversed `b`.
pub(crate) fn match_points(
    a: &[GeoPoint],
    b: &[GeoPoint],
    overlap: &BBox,
    params: &StitchParams,
    try_reverse: bool,
) -> Option<FragmentMatch> {
    let window = overlap.expand(params.join_tol);
    let origin = anchor(overlap, params.quant_cell);
    let (ia, ca) = restricted(a, &window, &origin, params.quant_cell);
    let (ib, cb) = restricted(b, &window, &origin, params.quant_cell);
    if ca.len() < params.min_lcs || cb.len() < params.min_lcs {
        return None;
    }
    let fwd = lcs_pairs(&ca, &cb);
    let mut best = FragmentMatch {
        a_indices: fwd.iter().map(|&(i, _)| ia[i]).collect(),
        b_indices: fwd.iter().map(|&(_, j)| ib[j]).collect(),
        score: fwd.len(),
        reversed: false,
    };
    if try_reverse {
        let cb_rev: Vec<(i64, i64)> = cb.iter().rev().copied().collect();
        let rev = lcs_pairs(&ca, &cb_rev);
        if rev.len() > best.score {
            let nb = b.len();
            let last = ib.len() - 1;
            best = FragmentMatch {
                a_indices: rev.iter().map(|&(i, _)| ia[i]).collect(),
                b_indices: rev.iter().map(|&(_, j)| nb - 1 - ib[last - j]).collect(),
                score: rev.len(),
                reversed: true,
            };
        }
    }
    (best.score >= params.min_lcs).then_some(best)
}

/// LCSP match of two fragments inside the overlap of their source tiles.
pub fn lcsp_match(
    a: &BoundaryFragment,
    b: &BoundaryFragment,
    overlap: &BBox,
    params: &StitchParams,
) -> Option<FragmentMatch> {
    match_points(open_points(a), open_points(b), overlap, params, true)
}
