//! Douglas–Peucker polyline simplification.

use crate::geo::GeoPoint;
use crate::planar::point_segment_distance;

/// Keeps a subsequence of `line` including both endpoints such that every
/// dropped point lies within `eps` of the kept chain. A chain whose
/// endpoints coincide (a closed ring) measures distance to that point.
pub fn simplify(line: &[GeoPoint], eps: f64) -> Vec<GeoPoint> {
    let n = line.len();
    if n <= 2 {
        return line.to_vec();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (line[lo], line[hi]);
        let mut far = lo;
        let mut dmax = -1.0;
        for (k, p) in line.iter().enumerate().take(hi).skip(lo + 1) {
            let d = point_segment_distance(p, &a, &b);
            if d > dmax {
                dmax = d;
                far = k;
            }
        }
        if dmax > eps {
            keep[far] = true;
            stack.push((far, hi));
            stack.push((lo, far));
        }
    }
    line.iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect()
}
