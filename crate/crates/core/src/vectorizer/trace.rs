//! Component labelling and Moore-neighbour boundary tracing on a binary grid.

use serde::{Deserialize, Serialize};

/// Binary raster, row-major; `true` is foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryGrid {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "grid size mismatch");
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let cells = (0..height)
            .flat_map(|r| (0..width).map(move |c| (c, r)))
            .map(|(c, r)| f(c, r))
            .collect();
        Self::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.width + col]
    }

    /// Out-of-grid positions read as background.
    fn at(&self, col: isize, row: isize) -> bool {
        col >= 0
            && row >= 0
            && (col as usize) < self.width
            && (row as usize) < self.height
            && self.cells[row as usize * self.width + col as usize]
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

/// Tile side an open contour ends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Edge {
    N,
    E,
    S,
    W,
}

impl Edge {
    pub fn as_str(self) -> &'static str {
        match self {
            Edge::N => "N",
            Edge::E => "E",
            Edge::S => "S",
            Edge::W => "W",
        }
    }

    pub fn parse(s: &str) -> Option<Edge> {
        match s {
            "N" => Some(Edge::N),
            "E" => Some(Edge::E),
            "S" => Some(Edge::S),
            "W" => Some(Edge::W),
            _ => None,
        }
    }
}

/// A traced boundary in pixel space. Points sit at pixel centres
/// `(col + 0.5, row + 0.5)`; closed contours repeat their first point at the
/// end. `normals` holds the outward miter vector at each point for a unit
/// offset, computed on the complete component boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelContour {
    pub points: Vec<(f64, f64)>,
    pub normals: Vec<(f64, f64)>,
    pub closed: bool,
    pub start_edge: Option<Edge>,
    pub end_edge: Option<Edge>,
    /// Pixel count of the traced component.
    pub area_px: usize,
}

// Clockwise on screen (rows grow downward), starting west.
const RING: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(d: (isize, isize)) -> usize {
    RING.iter().position(|&x| x == d).expect("unit neighbour offset")
}

/// 8-connected components as `(start pixel, pixel count)`, in raster order of
/// their first pixel.
fn components(grid: &BinaryGrid) -> Vec<((usize, usize), usize)> {
    let (w, h) = (grid.width, grid.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !grid.get(c, r) || seen[r * w + c] {
                continue;
            }
            seen[r * w + c] = true;
            stack.push((c, r));
            let mut count = 0;
            while let Some((x, y)) = stack.pop() {
                count += 1;
                for (dx, dy) in RING {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if grid.at(nx, ny) {
                        let k = ny as usize * w + nx as usize;
                        if !seen[k] {
                            seen[k] = true;
                            stack.push((nx as usize, ny as usize));
                        }
                    }
                }
            }
            out.push(((c, r), count));
        }
    }
    out
}

/// Moore-neighbour trace of the outer boundary starting at the component's
/// topmost-leftmost pixel. Returns boundary pixels in clockwise screen order
/// (foreground on the right), without repeating the start.
fn moore_trace(grid: &BinaryGrid, start: (usize, usize)) -> Vec<(usize, usize)> {
    let s = (start.0 as isize, start.1 as isize);
    // Next boundary pixel after `cur`, scanning clockwise from `back`.
    let step = |cur: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for k in 0..8 {
            let d = (back + k) % 8;
            let (dx, dy) = RING[d];
            let n = (cur.0 + dx, cur.1 + dy);
            if grid.at(n.0, n.1) {
                let prev = RING[(d + 7) % 8];
                // new backtrack: the last background cell examined, seen from n
                let b = (cur.0 + prev.0 - n.0, cur.1 + prev.1 - n.1);
                return Some((n, dir_index(b)));
            }
        }
        None
    };
    let mut out = vec![start];
    let Some((first, first_back)) = step(s, 0) else {
        return out;
    };
    let (mut cur, mut back) = (first, first_back);
    loop {
        let (next, nb) = step(cur, back).expect("a traced pixel has a foreground neighbour");
        if cur == s && next == first {
            break;
        }
        out.push((cur.0 as usize, cur.1 as usize));
        cur = next;
        back = nb;
    }
    out
}

fn edge_normal(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let (tx, ty) = (b.0 - a.0, b.1 - a.1);
    let len = (tx * tx + ty * ty).sqrt();
    if len == 0.0 {
        (0.0, 0.0)
    } else {
        (ty / len, -tx / len)
    }
}

/// Miter vectors: moving each vertex by `d` times its vector moves both
/// adjacent edges outward by `d`. Spike tips get zero; very sharp corners
/// are clamped to length √2.
fn outward_normals(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let m = pts.len();
    (0..m)
        .map(|k| {
            let n1 = edge_normal(pts[(k + m - 1) % m], pts[k]);
            let n2 = edge_normal(pts[k], pts[(k + 1) % m]);
            let denom = 1.0 + n1.0 * n2.0 + n1.1 * n2.1;
            if denom < 1e-9 {
                return (0.0, 0.0);
            }
            let (x, y) = ((n1.0 + n2.0) / denom, (n1.1 + n2.1) / denom);
            let len = (x * x + y * y).sqrt();
            if len > std::f64::consts::SQRT_2 {
                let s = std::f64::consts::SQRT_2 / len;
                (x * s, y * s)
            } else {
                (x, y)
            }
        })
        .collect()
}

fn edges_of(p: (usize, usize), w: usize, h: usize) -> [bool; 4] {
    [p.1 == 0, p.0 + 1 == w, p.1 + 1 == h, p.0 == 0]
}

fn pick_edge(p: (usize, usize), beyond: Option<(usize, usize)>, w: usize, h: usize) -> Edge {
    const ORDER: [Edge; 4] = [Edge::N, Edge::E, Edge::S, Edge::W];
    let own = edges_of(p, w, h);
    if let Some(q) = beyond {
        let other = edges_of(q, w, h);
        if let Some(k) = (0..4).find(|&k| own[k] && other[k]) {
            return ORDER[k];
        }
    }
    ORDER[(0..4).find(|&k| own[k]).expect("border pixel touches an edge")]
}

/// Traces every 8-connected foreground component of at least
/// `min_object_px` pixels. Boundaries that never touch the grid border come
/// back closed; the others are cut at their border pixels into open pieces
/// `[border, interior.., border]` tagged with the tile side at each end.
pub fn trace_boundaries(grid: &BinaryGrid, min_object_px: usize) -> Vec<PixelContour> {
    let (w, h) = (grid.width, grid.height);
    let mut out = Vec::new();
    for (start, count) in components(grid) {
        if count < min_object_px.max(1) {
            continue;
        }
        let px = moore_trace(grid, start);
        let centers: Vec<(f64, f64)> =
            px.iter().map(|&(c, r)| (c as f64 + 0.5, r as f64 + 0.5)).collect();
        let normals = outward_normals(&centers);
        let m = px.len();
        let on_border: Vec<bool> = px.iter().map(|&p| edges_of(p, w, h).contains(&true)).collect();

        let Some(first_b) = on_border.iter().position(|&b| b) else {
            let mut points = centers.clone();
            points.push(centers[0]);
            let mut nrm = normals.clone();
            nrm.push(normals[0]);
            out.push(PixelContour {
                points,
                normals: nrm,
                closed: true,
                start_edge: None,
                end_edge: None,
                area_px: count,
            });
            continue;
        };

        // Walk once around the loop starting at a border pixel.
        let at = |k: usize| (first_b + k) % m;
        let mut k = 0;
        while k < m {
            if !on_border[at(k + 1)] && on_border[at(k)] {
                let s = k;
                let mut e = k + 1;
                while !on_border[at(e)] {
                    e += 1;
                }
                let idx: Vec<usize> = (s..=e).map(at).collect();
                let before = on_border[at(s + m - 1)].then(|| px[at(s + m - 1)]);
                let after = on_border[at(e + 1)].then(|| px[at(e + 1)]);
                out.push(PixelContour {
                    points: idx.iter().map(|&i| centers[i]).collect(),
                    normals: idx.iter().map(|&i| normals[i]).collect(),
                    closed: false,
                    start_edge: Some(pick_edge(px[idx[0]], before, w, h)),
                    end_edge: Some(pick_edge(px[*idx.last().unwrap()], after, w, h)),
                    area_px: count,
                });
                k = e;
            } else {
                k += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::planar::{point_in_ring, point_on_ring};
    use proptest::prelude::*;

    fn block(w: usize, h: usize, c0: usize, r0: usize, c1: usize, r1: usize) -> BinaryGrid {
        BinaryGrid::from_fn(w, h, |c, r| c >= c0 && c < c1 && r >= r0 && r < r1)
    }

    fn ring(points: &[(f64, f64)]) -> Vec<GeoPoint> {
        points.iter().map(|&(x, y)| GeoPoint::new(x, y)).collect()
    }

    fn refill(c: &PixelContour, w: usize, h: usize) -> BinaryGrid {
        let r = ring(&c.points);
        BinaryGrid::from_fn(w, h, |col, row| {
            let p = GeoPoint::new(col as f64 + 0.5, row as f64 + 0.5);
            point_in_ring(&p, &r) || point_on_ring(&p, &r, 1e-9)
        })
    }

    #[test]
    fn blank_grid() {
        assert!(trace_boundaries(&BinaryGrid::from_fn(5, 5, |_, _| false), 1).is_empty());
    }

    #[test]
    fn square_block_round_trips() {
        let g = block(8, 8, 2, 2, 6, 6);
        let cs = trace_boundaries(&g, 16);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert!(c.closed);
        assert_eq!(c.points.first(), c.points.last());
        assert_eq!(c.points.len(), 13);
        assert_eq!(c.points[0], (2.5, 2.5));
        // clockwise on screen: heads east first
        assert_eq!(c.points[1], (3.5, 2.5));
        assert_eq!(refill(c, 8, 8), g);
        // top edge normal points north (negative rows)
        assert_eq!(c.normals[1], (0.0, -1.0));
    }

    #[test]
    fn small_objects_dropped() {
        let g = block(8, 8, 2, 2, 5, 5);
        assert!(trace_boundaries(&g, 16).is_empty());
        assert_eq!(trace_boundaries(&g, 9).len(), 1);
    }

    #[test]
    fn single_pixel() {
        let g = block(3, 3, 1, 1, 2, 2);
        let cs = trace_boundaries(&g, 1);
        assert_eq!(cs[0].points, vec![(1.5, 1.5), (1.5, 1.5)]);
    }

    #[test]
    fn east_flush_block_opens_on_east_edge() {
        let g = block(8, 8, 4, 2, 8, 6);
        let cs = trace_boundaries(&g, 16);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert!(!c.closed);
        assert_eq!(c.start_edge, Some(Edge::E));
        assert_eq!(c.end_edge, Some(Edge::E));
        let (first, last) = (c.points[0], *c.points.last().unwrap());
        assert_eq!(first.0, 7.5);
        assert_eq!(last.0, 7.5);
        // runs from the bottom-right round the west side to the top-right
        assert_eq!(first, (7.5, 5.5));
        assert_eq!(last, (7.5, 2.5));
    }

    #[test]
    fn corner_block_tags_both_sides() {
        // touches N and W
        let g = block(8, 8, 0, 0, 4, 4);
        let cs = trace_boundaries(&g, 16);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.start_edge, Some(Edge::N));
        assert_eq!(c.end_edge, Some(Edge::W));
        assert_eq!(c.points[0], (3.5, 0.5));
        assert_eq!(*c.points.last().unwrap(), (0.5, 3.5));
    }

    #[test]
    fn band_across_tile_gives_two_pieces() {
        let g = block(10, 10, 0, 3, 10, 7);
        let cs = trace_boundaries(&g, 16);
        assert_eq!(cs.len(), 2);
        assert!(cs.iter().all(|c| !c.closed));
        let tags: Vec<_> = cs.iter().map(|c| (c.start_edge, c.end_edge)).collect();
        assert!(tags.contains(&(Some(Edge::E), Some(Edge::W))));
        assert!(tags.contains(&(Some(Edge::W), Some(Edge::E))));
    }

    #[test]
    fn components_in_raster_order() {
        let g = BinaryGrid::from_fn(20, 20, |c, r| {
            (c >= 12 && c < 17 && r >= 1 && r < 6) || (c >= 2 && c < 7 && r >= 3 && r < 8)
        });
        let cs = trace_boundaries(&g, 16);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].points[0], (12.5, 1.5));
        assert_eq!(cs[1].points[0], (2.5, 3.5));
    }

    proptest! {
        // Hole-free interior blobs: union of a few overlapping boxes, kept
        // away from the border. Filling the contour gives the blob back.
        #[test]
        fn refill_reproduces_component(
            boxes in prop::collection::vec((2usize..20, 2usize..20, 1usize..8, 1usize..8), 1..5)
        ) {
            let (w, h) = (32, 32);
            let g = BinaryGrid::from_fn(w, h, |c, r| {
                boxes.iter().any(|&(x, y, bw, bh)| c >= x && c < x + bw && r >= y && r < y + bh)
            });
            let cs = trace_boundaries(&g, 1);
            for c in &cs {
                prop_assert!(c.closed);
                prop_assert!(refill(c, w, h).count_ones() >= c.area_px);
            }
            if cs.len() == 1 && holes_free(&g) {
                prop_assert_eq!(refill(&cs[0], w, h), g);
            }
        }
    }

    /// Background is 4-connected to the border everywhere.
    fn holes_free(g: &BinaryGrid) -> bool {
        let (w, h) = (g.width(), g.height());
        let mut seen = vec![false; w * h];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if (r == 0 || c == 0 || r + 1 == h || c + 1 == w) && !g.get(c, r) {
                    seen[r * w + c] = true;
                    stack.push((c, r));
                }
            }
        }
        while let Some((c, r)) = stack.pop() {
            let n = [(c.wrapping_sub(1), r), (c + 1, r), (c, r.wrapping_sub(1)), (c, r + 1)];
            for (x, y) in n {
                if x < w && y < h && !g.get(x, y) && !seen[y * w + x] {
                    seen[y * w + x] = true;
                    stack.push((x, y));
                }
            }
        }
        (0..w * h).all(|k| seen[k] || g.cells[k])
    }
}
