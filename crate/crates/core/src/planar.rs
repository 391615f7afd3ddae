//! Planar predicates and measures on lon/lat point sequences.
//!
//! Rings are accepted either open or with a repeated closing point; the
//! closing duplicate contributes a zero-length edge and is harmless.

use crate::geo::{BBox, GeoPoint, GeoPolygon};

#[inline]
fn cross(o: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

/// Shoelace signed area; positive for counter-clockwise rings.
pub fn signed_area(ring: &[GeoPoint]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    // Translate to the first vertex to limit cancellation at large |lon|.
    let o = ring[0];
    let mut acc = 0.0;
    for i in 1..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        acc += (a.lon - o.lon) * (b.lat - o.lat) - (b.lon - o.lon) * (a.lat - o.lat);
    }
    0.5 * acc
}

pub fn polyline_length(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| w[0].dist(&w[1])).sum()
}

pub fn point_segment_distance(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0);
    p.dist(&GeoPoint::new(a.lon + t * dx, a.lat + t * dy))
}

/// Distance from `p` to the nearest segment of a chain.
pub fn point_chain_distance(p: &GeoPoint, chain: &[GeoPoint]) -> f64 {
    match chain.len() {
        0 => f64::INFINITY,
        1 => p.dist(&chain[0]),
        _ => chain
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

fn within_box(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> bool {
    p.lon >= a.lon.min(b.lon)
        && p.lon <= a.lon.max(b.lon)
        && p.lat >= a.lat.min(b.lat)
        && p.lat <= a.lat.max(b.lat)
}

/// Closed segment intersection test (touching counts).
pub fn segments_intersect(a: &GeoPoint, b: &GeoPoint, c: &GeoPoint, d: &GeoPoint) -> bool {
    segment_intersection(a, b, c, d).is_some()
}

/// A point shared by segments `ab` and `cd`, if any. For collinear overlaps
/// the first endpoint found on the other segment is returned.
pub fn segment_intersection(
    a: &GeoPoint,
    b: &GeoPoint,
    c: &GeoPoint,
    d: &GeoPoint,
) -> Option<GeoPoint> {
    if a.lon.max(b.lon) < c.lon.min(d.lon)
        || c.lon.max(d.lon) < a.lon.min(b.lon)
        || a.lat.max(b.lat) < c.lat.min(d.lat)
        || c.lat.max(d.lat) < a.lat.min(b.lat)
    {
        return None;
    }
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        let t = d1 / (d1 - d2);
        return Some(GeoPoint::new(
            a.lon + t * (b.lon - a.lon),
            a.lat + t * (b.lat - a.lat),
        ));
    }
    if d1 == 0.0 && within_box(a, c, d) {
        return Some(*a);
    }
    if d2 == 0.0 && within_box(b, c, d) {
        return Some(*b);
    }
    if d3 == 0.0 && within_box(c, a, b) {
        return Some(*c);
    }
    if d4 == 0.0 && within_box(d, a, b) {
        return Some(*d);
    }
    None
}

fn open_ring(ring: &[GeoPoint]) -> &[GeoPoint] {
    if ring.len() > 1 && ring.first() == ring.last() {
        &ring[..ring.len() - 1]
    } else {
        ring
    }
}

/// Finds the first pair `(i, j)`, `i < j`, of non-adjacent edges that share a
/// point, or adjacent edges that fold back onto each other. Edge `k` runs
/// from `pts[k]` to `pts[k + 1]` (cyclically when `closed`).
fn first_crossing(pts: &[GeoPoint], closed: bool) -> Option<(usize, usize, GeoPoint)> {
    let n = pts.len();
    let m = if closed { n } else { n.saturating_sub(1) };
    if m < 2 {
        return None;
    }
    let seg = |k: usize| (pts[k], pts[(k + 1) % n]);
    // Sweep edges by minimum longitude.
    let mut order: Vec<usize> = (0..m).collect();
    let min_x = |k: usize| {
        let (a, b) = seg(k);
        a.lon.min(b.lon)
    };
    order.sort_by(|&x, &y| min_x(x).total_cmp(&min_x(y)).then(x.cmp(&y)));
    let mut best: Option<(usize, usize, GeoPoint)> = None;
    for (oi, &i) in order.iter().enumerate() {
        let (a, b) = seg(i);
        let max_x = a.lon.max(b.lon);
        for &j in &order[oi + 1..] {
            if min_x(j) > max_x {
                break;
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if let Some((bi, bj, _)) = best {
                if (lo, hi) >= (bi, bj) {
                    continue;
                }
            }
            let (c, d) = seg(j);
            let adjacent = hi == lo + 1 || (closed && lo == 0 && hi == m - 1);
            if adjacent {
                // Shared vertex is expected; only a fold-back counts.
                let (p, q, r) = if hi == lo + 1 {
                    (pts[lo], pts[hi], pts[(hi + 1) % n])
                } else {
                    (pts[hi], pts[0], pts[1])
                };
                if cross(&p, &q, &r) == 0.0 && folds_back(&p, &q, &r) {
                    best = Some((lo, hi, q));
                }
                continue;
            }
            if let Some(x) = segment_intersection(&a, &b, &c, &d) {
                best = Some((lo, hi, x));
            }
        }
    }
    best
}

/// `p -> q -> r` collinear with `r` heading back over `pq`.
fn folds_back(p: &GeoPoint, q: &GeoPoint, r: &GeoPoint) -> bool {
    let dot = (q.lon - p.lon) * (r.lon - q.lon) + (q.lat - p.lat) * (r.lat - q.lat);
    dot < 0.0
}

/// True when no two edges of the ring meet except adjacent edges at their
/// shared vertex.
pub fn ring_is_simple(ring: &[GeoPoint]) -> bool {
    let pts = open_ring(ring);
    if pts.len() < 3 {
        return false;
    }
    first_crossing(pts, true).is_none()
}

/// Cuts self-intersection loops out of a chain until none remain.
///
/// Open chains lose the loop between the two crossing edges. Closed rings
/// (given without the repeated closing point) keep whichever side of the
/// crossing encloses more area. The result has no consecutive duplicates.
pub fn remove_loops(points: &[GeoPoint], closed: bool) -> Vec<GeoPoint> {
    let mut pts = points.to_vec();
    pts.dedup();
    if closed {
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
    }
    while let Some((i, j, x)) = first_crossing(&pts, closed) {
        let m = if closed { pts.len() } else { pts.len() - 1 };
        let mut next = Vec::with_capacity(pts.len());
        if j == i + 1 || (closed && i == 0 && j == m - 1) {
            // fold-back: drop the spike tip
            let tip = if j == i + 1 { j } else { 0 };
            next = pts.clone();
            next.remove(tip);
        } else if closed {
            let mut inner = vec![x];
            inner.extend_from_slice(&pts[i + 1..=j]);
            let mut outer = pts[..=i].to_vec();
            outer.push(x);
            outer.extend_from_slice(&pts[j + 1..]);
            next = if signed_area(&inner).abs() > signed_area(&outer).abs() {
                inner
            } else {
                outer
            };
        } else {
            next.extend_from_slice(&pts[..=i]);
            next.push(x);
            next.extend_from_slice(&pts[j + 1..]);
        }
        next.dedup();
        if closed {
            while next.len() > 1 && next.first() == next.last() {
                next.pop();
            }
        }
        if next.len() >= pts.len() {
            break;
        }
        pts = next;
        if (closed && pts.len() < 3) || pts.len() < 2 {
            break;
        }
    }
    pts
}

/// Even-odd containment; points exactly on the boundary may go either way.
pub fn point_in_ring(p: &GeoPoint, ring: &[GeoPoint]) -> bool {
    let pts = open_ring(ring);
    let n = pts.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (pts[i], pts[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_on_ring(p: &GeoPoint, ring: &[GeoPoint], tol: f64) -> bool {
    let pts = open_ring(ring);
    (0..pts.len()).any(|i| point_segment_distance(p, &pts[i], &pts[(i + 1) % pts.len()]) <= tol)
}

pub fn point_in_polygon(p: &GeoPoint, poly: &GeoPolygon) -> bool {
    point_in_ring(p, poly.exterior()) && !poly.holes().iter().any(|h| point_in_ring(p, h))
}

/// Sutherland–Hodgman clip of a ring against a rectangle. The result is an
/// open ring (possibly with degenerate bridge edges, which do not change the
/// signed area).
pub fn clip_ring_to_rect(ring: &[GeoPoint], rect: &BBox) -> Vec<GeoPoint> {
    #[derive(Clone, Copy)]
    enum Side {
        Left,
        Right,
        Bottom,
        Top,
    }
    let inside = |p: &GeoPoint, s: Side| match s {
        Side::Left => p.lon >= rect.min_lon,
        Side::Right => p.lon <= rect.max_lon,
        Side::Bottom => p.lat >= rect.min_lat,
        Side::Top => p.lat <= rect.max_lat,
    };
    let cut = |a: &GeoPoint, b: &GeoPoint, s: Side| -> GeoPoint {
        match s {
            Side::Left | Side::Right => {
                let x = if matches!(s, Side::Left) { rect.min_lon } else { rect.max_lon };
                let t = (x - a.lon) / (b.lon - a.lon);
                GeoPoint::new(x, a.lat + t * (b.lat - a.lat))
            }
            Side::Bottom | Side::Top => {
                let y = if matches!(s, Side::Bottom) { rect.min_lat } else { rect.max_lat };
                let t = (y - a.lat) / (b.lat - a.lat);
                GeoPoint::new(a.lon + t * (b.lon - a.lon), y)
            }
        }
    };
    let mut out: Vec<GeoPoint> = open_ring(ring).to_vec();
    for side in [Side::Left, Side::Right, Side::Bottom, Side::Top] {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            match (inside(&prev, side), inside(&cur, side)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cut(&prev, &cur, side)),
                (false, true) => {
                    out.push(cut(&prev, &cur, side));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Area of `poly ∩ rect` by rectangle clipping of every ring.
pub fn polygon_rect_area(poly: &GeoPolygon, rect: &BBox) -> f64 {
    let ext = signed_area(&clip_ring_to_rect(poly.exterior(), rect)).abs();
    let holes: f64 = poly
        .holes()
        .iter()
        .map(|h| signed_area(&clip_ring_to_rect(h, rect)).abs())
        .sum();
    (ext - holes).max(0.0)
}

fn edges(poly: &GeoPolygon) -> Vec<(GeoPoint, GeoPoint)> {
    poly.rings()
        .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a != b)
        .collect()
}

/// Interior x-intervals of a horizontal line through a set of ring edges
/// (even-odd rule), sorted.
fn scanline_intervals(edges: &[(GeoPoint, GeoPoint)], y: f64, out: &mut Vec<f64>) {
    out.clear();
    for (a, b) in edges {
        if (a.lat > y) != (b.lat > y) {
            out.push(a.lon + (y - a.lat) / (b.lat - a.lat) * (b.lon - a.lon));
        }
    }
    out.sort_by(f64::total_cmp);
}

fn interval_overlap(xa: &[f64], xb: &[f64]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i + 1 < xa.len() && j + 1 < xb.len() {
        let lo = xa[i].max(xb[j]);
        let hi = xa[i + 1].min(xb[j + 1]);
        if hi > lo {
            acc += hi - lo;
        }
        if xa[i + 1] < xb[j + 1] {
            i += 2;
        } else {
            j += 2;
        }
    }
    acc
}

/// Exact area of `a ∩ b` for arbitrary (non-convex, holed) valid polygons.
///
/// The plane is cut into horizontal slabs at every vertex and every
/// edge/edge crossing; inside a slab the cross-section length is linear in
/// `y`, so the midpoint rule integrates it exactly.
pub fn intersection_area(a: &GeoPolygon, b: &GeoPolygon) -> f64 {
    let (ba, bb) = (a.bbox(), b.bbox());
    let Some(window) = ba.intersection(&bb) else {
        return 0.0;
    };
    if window.height() <= 0.0 || window.width() <= 0.0 {
        return 0.0;
    }
    let ea = edges(a);
    let eb = edges(b);
    let mut ys: Vec<f64> = ea
        .iter()
        .chain(eb.iter())
        .map(|(p, _)| p.lat)
        .filter(|y| *y >= window.min_lat && *y <= window.max_lat)
        .collect();
    ys.push(window.min_lat);
    ys.push(window.max_lat);
    for (p, q) in &ea {
        if p.lat.max(q.lat) < window.min_lat || p.lat.min(q.lat) > window.max_lat {
            continue;
        }
        for (r, s) in &eb {
            if let Some(x) = segment_intersection(p, q, r, s) {
                ys.push(x.lat);
            }
        }
    }
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    let mut area = 0.0;
    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        if y1 <= y0 || y1 < window.min_lat || y0 > window.max_lat {
            continue;
        }
        let ym = 0.5 * (y0 + y1);
        scanline_intervals(&ea, ym, &mut xa);
        scanline_intervals(&eb, ym, &mut xb);
        area += interval_overlap(&xa, &xb) * (y1 - y0);
    }
    area
}

pub fn iou(a: &GeoPolygon, b: &GeoPolygon) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn polygons_intersect(a: &GeoPolygon, b: &GeoPolygon) -> bool {
    if !a.bbox().intersects(&b.bbox()) {
        return false;
    }
    if a.exterior().iter().any(|p| point_in_polygon(p, b))
        || b.exterior().iter().any(|p| point_in_polygon(p, a))
    {
        return true;
    }
    let (ea, eb) = (edges(a), edges(b));
    ea.iter()
        .any(|(p, q)| eb.iter().any(|(r, s)| segments_intersect(p, q, r, s)))
}

fn densify(points: &[GeoPoint], step: f64) -> Vec<GeoPoint> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let n = ((w[0].dist(&w[1]) / step).ceil() as usize).max(1);
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push(GeoPoint::new(
                w[0].lon + t * (w[1].lon - w[0].lon),
                w[0].lat + t * (w[1].lat - w[0].lat),
            ));
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

/// Symmetric Hausdorff distance between two chains, sampling each chain at
/// `step` and measuring exact distances to the other chain's segments.
pub fn hausdorff(a: &[GeoPoint], b: &[GeoPoint], step: f64) -> f64 {
    let directed = |x: &[GeoPoint], y: &[GeoPoint]| {
        densify(x, step)
            .iter()
            .map(|p| point_chain_distance(p, y))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
