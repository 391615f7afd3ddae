//! Joins per-tile boundary fragments into whole rings.
//!
//! Two fragments that cross the same tile overlap share a run of boundary
//! points there. That run is found by LCS over grid-quantized points
//! ([`lcsp_match`]), optionally after a translation-only ICP pre-alignment
//! ([`register_points`]), and the fragments are spliced at it
//! ([`merge_fragments`]).

mod lcs;
mod register;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BBox, GeoPoint, GeoPolygon};
use crate::planar;
use crate::vectorizer::{BoundaryFragment, Edge};

pub use lcs::{lcs_len, lcs_pairs, lcsp_match};
pub use register::register_points;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StitchError {
    #[error("no point pairs within the match radius")]
    NoCorrespondences,
    #[error("registration shift ({dx}, {dy}) exceeds the match radius {limit}")]
    ShiftTooLarge { dx: f64, dy: f64, limit: f64 },
    #[error("match does not fit its fragments: {0}")]
    IncompatibleMatch(String),
    #[error("degenerate ring: {0}")]
    DegenerateRing(String),
    #[error("invalid stitch parameter: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchParams {
    pub quant_cell: f64,
    pub min_lcs: usize,
    pub join_tol: f64,
    pub icp_max_iter: usize,
    pub icp_conv_tol: f64,
    pub icp_match_radius: f64,
}

impl StitchParams {
    /// Defaults scaled to a pixel width of `px` degrees.
    pub fn for_pixel(px: f64) -> Self {
        Self {
            quant_cell: px,
            min_lcs: 3,
            join_tol: 1.5 * px,
            icp_max_iter: 20,
            icp_conv_tol: 1e-9,
            icp_match_radius: 3.0 * px,
        }
    }

    pub fn validate(&self) -> Result<(), StitchError> {
        let positive = [
            ("quant_cell", self.quant_cell),
            ("join_tol", self.join_tol),
            ("icp_conv_tol", self.icp_conv_tol),
            ("icp_match_radius", self.icp_match_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(StitchError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_lcs < 2 {
            return Err(StitchError::InvalidParams("min_lcs must be at least 2".into()));
        }
        if self.icp_max_iter == 0 {
            return Err(StitchError::InvalidParams("icp_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StitchMode {
    #[default]
    Lcsp,
    Register,
}

impl FromStr for StitchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lcsp" => Ok(StitchMode::Lcsp),
            "register" => Ok(StitchMode::Register),
            other => Err(format!("unknown stitch mode `{other}` (expected lcsp or register)")),
        }
    }
}

impl fmt::Display for StitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StitchMode::Lcsp => "lcsp",
            StitchMode::Register => "register",
        })
    }
}

/// Aligned point pairs of two fragments: `a.points[a_indices[k]]` matches
/// `b'[b_indices[k]]`, where `b'` is `b` reversed when `reversed` is set.
/// Both index lists are strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FragmentMatch {
    pub a_indices: Vec<usize>,
    pub b_indices: Vec<usize>,
    pub score: usize,
    pub reversed: bool,
}

impl FragmentMatch {
    /// Inclusive index span of the match in `a`.
    pub fn a_range(&self) -> (usize, usize) {
        (self.a_indices[0], *self.a_indices.last().unwrap())
    }

    /// Inclusive index span of the match in (possibly reversed) `b`.
    pub fn b_range(&self) -> (usize, usize) {
        (self.b_indices[0], *self.b_indices.last().unwrap())
    }

    /// The same alignment seen from `b`'s side.
    pub fn swapped(&self, a_len: usize, b_len: usize) -> FragmentMatch {
        if self.reversed {
            // b' = reverse(b) aligned to a  <=>  reverse(a) aligned to b
            FragmentMatch {
                a_indices: self.b_indices.iter().rev().map(|&j| b_len - 1 - j).collect(),
                b_indices: self.a_indices.iter().rev().map(|&i| a_len - 1 - i).collect(),
                score: self.score,
                reversed: true,
            }
        } else {
            FragmentMatch {
                a_indices: self.b_indices.clone(),
                b_indices: self.a_indices.clone(),
                score: self.score,
                reversed: false,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidShift {
    pub dx: f64,
    pub dy: f64,
}

impl RigidShift {
    pub fn magnitude(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

fn reversed_fragment(f: &BoundaryFragment) -> BoundaryFragment {
    // closed rings reverse their open run so indices line up with matching
    let mut points = lcs::open_points(f).to_vec();
    points.reverse();
    if f.closed {
        points.push(points[0]);
    }
    BoundaryFragment {
        points,
        closed: f.closed,
        source_tiles: f.source_tiles.clone(),
        start_edge: f.end_edge,
        end_edge: f.start_edge,
    }
}

fn union_sources(a: &[String], b: &[String]) -> Vec<String> {
    a.iter()
        .chain(b)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn check_indices(idx: &[usize], len: usize, what: &str) -> Result<(), StitchError> {
    if idx.iter().any(|&i| i >= len) {
        return Err(StitchError::IncompatibleMatch(format!("{what} index out of bounds")));
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StitchError::IncompatibleMatch(format!("{what} indices not increasing")));
    }
    Ok(())
}

/// Splices `b` onto `a` at the matched run: `a` up to the run, midpoints of
/// the matched pairs, then the rest of `b`. The result is closed (snapped)
/// when its ends land within `join_tol` of each other.
pub fn merge_fragments(
    a: &BoundaryFragment,
    b: &BoundaryFragment,
    m: &FragmentMatch,
    join_tol: f64,
) -> Result<BoundaryFragment, StitchError> {
    if m.a_indices.is_empty() || m.a_indices.len() != m.b_indices.len() || m.score != m.a_indices.len() {
        return Err(StitchError::IncompatibleMatch("index lists differ in length".into()));
    }
    let b2 = if m.reversed { reversed_fragment(b) } else { b.clone() };
    check_indices(&m.a_indices, a.points.len(), "a")?;
    check_indices(&m.b_indices, b2.points.len(), "b")?;

    let (a0, _) = m.a_range();
    let (_, b1) = m.b_range();
    let mut points: Vec<GeoPoint> = a.points[..a0].to_vec();
    points.extend(
        m.a_indices
            .iter()
            .zip(&m.b_indices)
            .map(|(&i, &j)| a.points[i].midpoint(&b2.points[j])),
    );
    points.extend_from_slice(&b2.points[b1 + 1..]);
    points.dedup();

    let source_tiles = union_sources(&a.source_tiles, &b.source_tiles);
    let closes = points.len() >= 4 && points[0].dist(points.last().unwrap()) <= join_tol;
    if closes {
        let first = points[0];
        *points.last_mut().unwrap() = first;
        return Ok(BoundaryFragment {
            points,
            closed: true,
            source_tiles,
            start_edge: None,
            end_edge: None,
        });
    }
    Ok(BoundaryFragment {
        points,
        closed: false,
        source_tiles,
        start_edge: a.start_edge,
        end_edge: b2.end_edge,
    })
}

fn cmp_points(a: &[GeoPoint], b: &[GeoPoint]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        let o = p.lon.total_cmp(&q.lon).then(p.lat.total_cmp(&q.lat));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Total order on fragment content, used to make grouping order irrelevant.
fn cmp_content(a: &BoundaryFragment, b: &BoundaryFragment) -> Ordering {
    cmp_points(&a.points, &b.points)
        .then(a.closed.cmp(&b.closed))
        .then_with(|| a.source_tiles.cmp(&b.source_tiles))
        .then(a.start_edge.cmp(&b.start_edge))
        .then(a.end_edge.cmp(&b.end_edge))
}

fn inside_all(points: &[GeoPoint], b: &BBox) -> bool {
    points.iter().all(|p| b.contains_point(p))
}

/// A fragment seen in full by another tile is a duplicate of that tile's own
/// trace. Open pieces are dropped when any other tile sees them whole;
/// closed rings keep only the copy from the smallest tile id that sees them.
fn is_redundant(f: &BoundaryFragment, tiles: &BTreeMap<String, BBox>, join_tol: f64) -> bool {
    let own = |id: &String| f.source_tiles.contains(id);
    if f.closed {
        let Some(min_src) = f.source_tiles.first() else {
            return false;
        };
        tiles
            .iter()
            .filter(|(id, _)| !own(id) && *id < min_src)
            .any(|(_, b)| inside_all(&f.points, &b.expand(-join_tol)))
    } else {
        tiles
            .iter()
            .filter(|(id, _)| !own(id))
            .any(|(_, b)| inside_all(&f.points, &b.expand(-join_tol)))
    }
}

/// Overlaps of every pair of distinct tiles drawn from the two source lists.
fn pair_overlaps(sa: &[String], sb: &[String], tiles: &BTreeMap<String, BBox>) -> Vec<BBox> {
    let mut out = Vec::new();
    for ta in sa {
        for tb in sb {
            if ta == tb {
                continue;
            }
            let (Some(ba), Some(bb)) = (tiles.get(ta), tiles.get(tb)) else {
                continue;
            };
            if let Some(o) = ba.overlap(bb) {
                out.push(o);
            }
        }
    }
    out
}

fn in_windows(points: &[GeoPoint], windows: &[BBox]) -> bool {
    points.iter().all(|p| windows.iter().any(|w| w.contains_point(p)))
}

fn shifted(f: &BoundaryFragment, s: RigidShift) -> BoundaryFragment {
    BoundaryFragment {
        points: f
            .points
            .iter()
            .map(|p| GeoPoint::new(p.lon + s.dx, p.lat + s.dy))
            .collect(),
        ..f.clone()
    }
}

fn densified(f: &BoundaryFragment, window: &BBox, origin: &GeoPoint, cell: f64) -> BoundaryFragment {
    BoundaryFragment {
        points: lcs::densify(&f.points, window, origin, cell),
        ..f.clone()
    }
}

/// Best match of two fragments, with the densified copies its indices
/// refer to.
fn pair_match(
    a: &BoundaryFragment,
    b: &BoundaryFragment,
    overlap: &BBox,
    windows: &[BBox],
    params: &StitchParams,
    mode: StitchMode,
) -> Option<(FragmentMatch, BoundaryFragment, BoundaryFragment)> {
    let window = overlap.expand(params.join_tol);
    let origin = lcs::anchor(overlap, params.quant_cell);
    let cell = params.quant_cell;
    match mode {
        StitchMode::Lcsp => {
            let (a2, b2) = (densified(a, &window, &origin, cell), densified(b, &window, &origin, cell));
            let m = lcsp_match(&a2, &b2, overlap, params)?;
            Some((m, a2, b2))
        }
        StitchMode::Register => {
            let pick = |f: &BoundaryFragment| -> Vec<GeoPoint> {
                f.points
                    .iter()
                    .copied()
                    .filter(|p| windows.iter().any(|w| w.contains_point(p)))
                    .collect()
            };
            let (pa, pb) = (pick(a), pick(b));
            if pa.is_empty() || pb.is_empty() {
                return None;
            }
            let shift = register_points(&pa, &pb, params).ok()?;
            // b is densified on the grid as seen from its shifted position
            let back = GeoPoint::new(origin.lon - shift.dx, origin.lat - shift.dy);
            let b_window = BBox {
                min_lon: window.min_lon - shift.dx,
                min_lat: window.min_lat - shift.dy,
                max_lon: window.max_lon - shift.dx,
                max_lat: window.max_lat - shift.dy,
            };
            let a2 = densified(a, &window, &origin, cell);
            let b2 = densified(b, &b_window, &back, cell);
            let m = lcsp_match(&a2, &shifted(&b2, shift), overlap, params)?;
            Some((m, a2, b2))
        }
    }
}

/// Match score and merged fragment of a pair, if the match joins them.
///
/// A join must only discard pieces lying in the tile overlaps: the matched
/// runs, plus `a` after its run and `b` before it (or the other way
/// round). When one fragment's unmatched parts all lie in the overlaps it
/// is a second trace of a piece of the other, which absorbs it.
fn pair_join(
    a: &BoundaryFragment,
    b: &BoundaryFragment,
    tiles: &BTreeMap<String, BBox>,
    params: &StitchParams,
    mode: StitchMode,
) -> Option<(usize, BoundaryFragment)> {
    let overlaps = pair_overlaps(&a.source_tiles, &b.source_tiles, tiles);
    let overlap = overlaps.iter().skip(1).fold(*overlaps.first()?, |u, o| u.union(o));
    let windows: Vec<BBox> = overlaps.iter().map(|o| o.expand(params.join_tol)).collect();
    let (m, a2, b2) = pair_match(a, b, &overlap, &windows, params, mode)?;
    let bp = if m.reversed { reversed_fragment(&b2) } else { b2.clone() };
    let (a0, a1) = m.a_range();
    let (b0, b1) = m.b_range();
    let ap = &a2.points;
    let bq = &bp.points;

    // the runs themselves are replaced by midpoints, so they must be overlap
    // content as well
    if !in_windows(&ap[a0..=a1], &windows) || !in_windows(&bq[b0..=b1], &windows) {
        return None;
    }
    let mut joined: Option<BoundaryFragment> = None;
    let mut consider = |f: Result<BoundaryFragment, StitchError>| {
        if let Ok(f) = f {
            if joined.as_ref().is_none_or(|g| f.length() > g.length()) {
                joined = Some(f);
            }
        }
    };
    if in_windows(&ap[a1 + 1..], &windows) && in_windows(&bq[..b0], &windows) {
        consider(merge_fragments(&a2, &b2, &m, params.join_tol));
    }
    if in_windows(&bq[b1 + 1..], &windows) && in_windows(&ap[..a0], &windows) {
        consider(merge_fragments(&b2, &a2, &m.swapped(ap.len(), bq.len()), params.join_tol));
    }
    if let Some(f) = joined {
        return Some((m.score, f));
    }

    let b_inside = in_windows(&bq[..b0], &windows) && in_windows(&bq[b1 + 1..], &windows);
    let a_inside = in_windows(&ap[..a0], &windows) && in_windows(&ap[a1 + 1..], &windows);
    let keeper = match (a_inside, b_inside) {
        (false, true) => a,
        (true, false) => b,
        (true, true) if b.length() > a.length() => b,
        (true, true) => a,
        (false, false) => return None,
    };
    Some((
        m.score,
        BoundaryFragment {
            source_tiles: union_sources(&a.source_tiles, &b.source_tiles),
            ..keeper.clone()
        },
    ))
}

/// Drops fragments that duplicate part of a closed ring traced from other
/// tiles. Every point must lie in an overlap of the two source lists. An
/// open fragment must also start and end within `join_tol` of the ring; a
/// closed one must lie inside the ring (or within `join_tol` of it), as
/// happens when a stamp cuts off a piece of an object in one tile only. The
/// ring inherits the dropped sources.
fn absorb_into_rings(frags: &mut Vec<BoundaryFragment>, tiles: &BTreeMap<String, BBox>, params: &StitchParams) {
    let tol = params.join_tol;
    let near = |p: &GeoPoint, ring: &[GeoPoint]| planar::point_chain_distance(p, ring) <= tol;
    let mut k = 0;
    while k < frags.len() {
        let o = &frags[k];
        let host = (0..frags.len()).find(|&h| {
            let c = &frags[h];
            if h == k || !c.closed || (o.closed && c.points.len() <= o.points.len()) {
                return false;
            }
            let windows: Vec<BBox> = pair_overlaps(&o.source_tiles, &c.source_tiles, tiles)
                .iter()
                .map(|w| w.expand(tol))
                .collect();
            if windows.is_empty() || !in_windows(&o.points, &windows) {
                return false;
            }
            if o.closed {
                o.points
                    .iter()
                    .all(|p| near(p, &c.points) || planar::point_in_ring(p, &c.points))
            } else {
                near(&o.first(), &c.points) && near(&o.last(), &c.points)
            }
        });
        match host {
            Some(h) => {
                let o = frags.remove(k);
                let h = if h > k { h - 1 } else { h };
                frags[h].source_tiles = union_sources(&frags[h].source_tiles, &o.source_tiles);
                k = 0;
            }
            None => k += 1,
        }
    }
}

/// Tries to close a fragment on itself where its two ends cross the same
/// overlap of its source tiles.
fn self_close(
    f: &BoundaryFragment,
    tiles: &BTreeMap<String, BBox>,
    params: &StitchParams,
) -> Option<BoundaryFragment> {
    if f.closed || f.source_tiles.len() < 2 || f.points.len() < 2 * params.min_lcs {
        return None;
    }
    let (first, last) = (f.first(), f.last());
    let src = &f.source_tiles;
    for (i, ta) in src.iter().enumerate() {
        for tb in &src[i + 1..] {
            let (Some(ba), Some(bb)) = (tiles.get(ta), tiles.get(tb)) else {
                continue;
            };
            let Some(ov) = ba.overlap(bb) else {
                continue;
            };
            let grown = ov.expand(params.join_tol);
            if !(grown.contains_point(&first) && grown.contains_point(&last)) {
                continue;
            }
            let dense = lcs::densify(&f.points, &grown, &lcs::anchor(&ov, params.quant_cell), params.quant_cell);
            let mid = dense.len() / 2;
            let (p, q) = dense.split_at(mid);
            let Some(m) = lcs::match_points(q, p, &ov, params, false) else {
                continue;
            };
            let (p_first, p_last) = m.b_range();
            let (q_first, q_last) = m.a_range();
            // only overlap pieces may be cut away
            let gw = [grown];
            if !in_windows(&p[..p_first], &gw) || !in_windows(&q[q_last + 1..], &gw) {
                continue;
            }
            let mut ring: Vec<GeoPoint> = m
                .a_indices
                .iter()
                .zip(&m.b_indices)
                .map(|(&qi, &pi)| q[qi].midpoint(&p[pi]))
                .collect();
            ring.extend_from_slice(&dense[p_last + 1..mid + q_first]);
            ring.dedup();
            while ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            let mut distinct = ring.clone();
            distinct.sort_by(|x, y| x.lex_cmp(y));
            distinct.dedup();
            if distinct.len() < 3 {
                continue;
            }
            ring.push(ring[0]);
            return Some(BoundaryFragment {
                points: ring,
                closed: true,
                source_tiles: f.source_tiles.clone(),
                start_edge: None,
                end_edge: None,
            });
        }
    }
    None
}

/// Greedy pairwise stitching of the fragments of one group.
///
/// Open fragments from tiles whose footprints overlap are matched pairwise;
/// the best-scoring pair (ties: lower fragment ids, ids assigned by content
/// order) is merged and the search repeats until nothing matches. Closed
/// fragments pass through. `tile_bboxes` should list every selected tile,
/// not only the group's, so duplicate traces can be recognised.
pub fn stitch_group(
    frags: Vec<BoundaryFragment>,
    tile_bboxes: &BTreeMap<String, BBox>,
    params: &StitchParams,
    mode: StitchMode,
) -> Vec<BoundaryFragment> {
    let mut frags = frags;
    frags.sort_by(cmp_content);
    frags.dedup();
    let mut pool: Vec<Option<BoundaryFragment>> = frags
        .into_iter()
        .filter(|f| !is_redundant(f, tile_bboxes, params.join_tol))
        .map(Some)
        .collect();

    let mut cache: HashMap<(usize, usize), Option<(usize, BoundaryFragment)>> = HashMap::new();
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        let live: Vec<usize> = (0..pool.len())
            .filter(|&i| pool[i].as_ref().is_some_and(|f| !f.closed))
            .collect();
        for (x, &i) in live.iter().enumerate() {
            for &j in &live[x + 1..] {
                let m = cache.entry((i, j)).or_insert_with(|| {
                    let (a, b) = (pool[i].as_ref().unwrap(), pool[j].as_ref().unwrap());
                    pair_join(a, b, tile_bboxes, params, mode)
                });
                if let Some((score, _)) = m {
                    if best.is_none_or(|(s, _, _)| *score > s) {
                        best = Some((*score, i, j));
                    }
                }
            }
        }
        let Some((_, i, j)) = best else {
            break;
        };
        let (_, merged) = cache.remove(&(i, j)).flatten().expect("cached join");
        pool[i] = None;
        pool[j] = None;
        let merged = self_close(&merged, tile_bboxes, params).unwrap_or(merged);
        pool.push(Some(merged));
    }

    let mut out: Vec<BoundaryFragment> = pool.into_iter().flatten().collect();
    absorb_into_rings(&mut out, tile_bboxes, params);
    out.sort_by(|a, b| a.min_point().lex_cmp(&b.min_point()).then_with(|| cmp_content(a, b)));
    out
}

/// Turns closed fragments (and open ones whose ends meet within
/// `join_tol`) into polygons; everything else is returned as leftovers.
pub fn close_rings(
    frags: &[BoundaryFragment],
    join_tol: f64,
) -> Result<(Vec<GeoPolygon>, Vec<BoundaryFragment>), StitchError> {
    let (tagged, leftovers) = close_rings_tagged(frags, join_tol)?;
    Ok((tagged.into_iter().map(|(p, _)| p).collect(), leftovers))
}

/// [`close_rings`], keeping each polygon's source tiles.
pub fn close_rings_tagged(
    frags: &[BoundaryFragment],
    join_tol: f64,
) -> Result<(Vec<(GeoPolygon, Vec<String>)>, Vec<BoundaryFragment>), StitchError> {
    let mut polys = Vec::new();
    let mut leftovers = Vec::new();
    for f in frags {
        let closable = f.closed
            || (f.points.len() >= 3 && f.first().dist(&f.last()) <= join_tol);
        if !closable {
            leftovers.push(f.clone());
            continue;
        }
        let mut pts = f.points.clone();
        if !f.closed {
            *pts.last_mut().unwrap() = pts[0];
        }
        let ring = planar::remove_loops(&pts, true);
        let poly = GeoPolygon::new(ring, Vec::new()).map_err(|e| {
            StitchError::DegenerateRing(format!(
                "fragment from {}: {e}",
                f.source_tiles.join(",")
            ))
        })?;
        polys.push((poly, f.source_tiles.clone()));
    }
    Ok((polys, leftovers))
}

/// Edge tag of a point relative to a tile footprint: the nearest side.
pub fn nearest_edge(p: &GeoPoint, b: &BBox) -> Edge {
    let d = [
        (b.max_lat - p.lat).abs(),
        (b.max_lon - p.lon).abs(),
        (p.lat - b.min_lat).abs(),
        (p.lon - b.min_lon).abs(),
    ];
    let k = (0..4).min_by(|&x, &y| d[x].total_cmp(&d[y])).unwrap();
    [Edge::N, Edge::E, Edge::S, Edge::W][k]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> GeoPoint {
        GeoPoint::new(x, y)
    }

    fn frag(pts: &[(f64, f64)], closed: bool, src: &[&str]) -> BoundaryFragment {
        BoundaryFragment {
            points: pts.iter().map(|&(x, y)| p(x, y)).collect(),
            closed,
            source_tiles: src.iter().map(|s| s.to_string()).collect(),
            start_edge: (!closed).then_some(Edge::N),
            end_edge: (!closed).then_some(Edge::S),
        }
    }

    fn params() -> StitchParams {
        StitchParams::for_pixel(0.1)
    }

    fn bb(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    #[test]
    fn self_match_is_full() {
        let f = frag(&[(0.05, 0.05), (0.35, 0.05), (0.65, 0.25), (0.95, 0.55)], false, &["a"]);
        let m = lcsp_match(&f, &f, &bb(0.0, 0.0, 1.0, 1.0), &params()).unwrap();
        assert_eq!(m.score, 4);
        assert_eq!(m.a_indices, vec![0, 1, 2, 3]);
        assert_eq!(m.b_indices, vec![0, 1, 2, 3]);
        assert!(!m.reversed);
    }

    #[test]
    fn disjoint_cells_do_not_match() {
        let a = frag(&[(0.05, 0.05), (0.15, 0.05), (0.25, 0.05)], false, &["a"]);
        let b = frag(&[(0.05, 0.55), (0.15, 0.55), (0.25, 0.55)], false, &["b"]);
        assert!(lcsp_match(&a, &b, &bb(0.0, 0.0, 1.0, 1.0), &params()).is_none());
    }

    #[test]
    fn reversed_match_found_and_symmetric() {
        let a = frag(&[(0.05, 0.05), (0.35, 0.05), (0.65, 0.25), (0.95, 0.55)], false, &["a"]);
        let mut b = a.clone();
        b.points.reverse();
        let ov = bb(0.0, 0.0, 1.0, 1.0);
        let m = lcsp_match(&a, &b, &ov, &params()).unwrap();
        assert!(m.reversed);
        assert_eq!(m.score, 4);
        assert_eq!(lcsp_match(&b, &a, &ov, &params()).unwrap().score, 4);
    }

    #[test]
    fn two_halves_of_square_close() {
        // west half and east half sharing a 3-point run along the bottom
        let a = frag(
            &[(2.0, 2.0), (1.0, 2.0), (0.0, 2.0), (0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.5, 0.0)],
            false,
            &["L"],
        );
        let b = frag(
            &[(0.95, 0.0), (2.0, 0.0), (2.5, 0.0), (3.0, 0.0), (3.0, 2.0), (2.05, 2.0)],
            false,
            &["R"],
        );
        let m = FragmentMatch {
            a_indices: vec![4, 5, 6],
            b_indices: vec![0, 1, 2],
            score: 3,
            reversed: false,
        };
        let merged = merge_fragments(&a, &b, &m, 0.2).unwrap();
        assert!(merged.closed);
        assert_eq!(merged.points.first(), merged.points.last());
        assert_eq!(merged.source_tiles, vec!["L".to_string(), "R".to_string()]);
        assert!(merged.start_edge.is_none() && merged.end_edge.is_none());
        let (polys, left) = close_rings(&[merged], 0.2).unwrap();
        assert!(left.is_empty());
        assert!((polys[0].area() - 6.0).abs() < 0.2);
    }

    #[test]
    fn open_merge_keeps_edges() {
        let a = frag(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], false, &["A"]);
        let mut b = frag(&[(2.0, 0.0), (3.0, 0.0), (4.0, 0.0), (5.0, 0.0)], false, &["B"]);
        b.end_edge = Some(Edge::E);
        let m = FragmentMatch {
            a_indices: vec![2, 3],
            b_indices: vec![0, 1],
            score: 2,
            reversed: false,
        };
        let merged = merge_fragments(&a, &b, &m, 0.1).unwrap();
        assert!(!merged.closed);
        assert_eq!(merged.points.len(), 6);
        assert_eq!((merged.start_edge, merged.end_edge), (Some(Edge::N), Some(Edge::E)));
    }

    #[test]
    fn incompatible_match_rejected() {
        let a = frag(&[(0.0, 0.0), (1.0, 0.0)], false, &["A"]);
        let m = FragmentMatch {
            a_indices: vec![0, 5],
            b_indices: vec![0, 1],
            score: 2,
            reversed: false,
        };
        assert!(matches!(
            merge_fragments(&a, &a, &m, 0.1),
            Err(StitchError::IncompatibleMatch(_))
        ));
    }

    #[test]
    fn closed_self_merge_is_idempotent() {
        let a = frag(
            &[(0.05, 0.05), (0.55, 0.05), (0.55, 0.55), (0.05, 0.55), (0.05, 0.05)],
            true,
            &["A"],
        );
        let m = lcsp_match(&a, &a, &bb(0.0, 0.0, 1.0, 1.0), &params()).unwrap();
        let merged = merge_fragments(&a, &a, &m, 0.15).unwrap();
        assert!(merged.closed);
        assert!(planar::hausdorff(&merged.points, &a.points, 0.01) <= params().quant_cell);
    }

    #[test]
    fn single_closed_fragment_unchanged() {
        let a = frag(
            &[(0.05, 0.05), (0.55, 0.05), (0.55, 0.55), (0.05, 0.55), (0.05, 0.05)],
            true,
            &["A"],
        );
        let tiles = BTreeMap::from([("A".to_string(), bb(0.0, 0.0, 1.0, 1.0))]);
        let out = stitch_group(vec![a.clone()], &tiles, &params(), StitchMode::Lcsp);
        assert_eq!(out, vec![a]);
    }

    #[test]
    fn close_rings_rules() {
        let closed = frag(
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)],
            true,
            &["A"],
        );
        let (polys, left) = close_rings(&[closed], 0.1).unwrap();
        assert_eq!((polys.len(), left.len()), (1, 0));

        let near = frag(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.01)], false, &["A"]);
        let (polys, left) = close_rings(&[near], 0.1).unwrap();
        assert_eq!((polys.len(), left.len()), (1, 0));
        assert_eq!(polys[0].exterior().len(), 5);

        let far = frag(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], false, &["A"]);
        let (polys, left) = close_rings(&[far], 0.1).unwrap();
        assert_eq!((polys.len(), left.len()), (0, 1));

        let flat = frag(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (0.0, 0.0)], true, &["A"]);
        assert!(matches!(close_rings(&[flat], 0.1), Err(StitchError::DegenerateRing(_))));
    }

    #[test]
    fn swapped_match_round_trips() {
        let m = FragmentMatch {
            a_indices: vec![1, 3, 4],
            b_indices: vec![0, 2, 5],
            score: 3,
            reversed: true,
        };
        let s = m.swapped(6, 8);
        assert_eq!(s.a_indices, vec![2, 5, 7]);
        assert_eq!(s.b_indices, vec![1, 2, 4]);
        assert_eq!(s.swapped(8, 6), m);
    }
}
