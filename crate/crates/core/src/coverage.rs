//! Does a set of rectangular footprints cover a query polygon?
//!
//! Footprint edges and the query bbox edges compress the plane into a grid
//! of cells. A cell is a gap when it lies in no footprint and meets the query
//! with positive area; gap cells are then merged into maximal rectangles.

use serde::{Deserialize, Serialize};

use crate::geo::{BBox, GeoPolygon};
use crate::planar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    pub gaps: Vec<BBox>,
    pub gap_area: f64,
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Index range `[lo, hi)` of grid cells between `a` and `b` on axis `axis`.
fn cell_span(axis: &[f64], a: f64, b: f64) -> (usize, usize) {
    let lo = axis.partition_point(|&x| x < a);
    let hi = axis.partition_point(|&x| x < b);
    (lo, hi)
}

pub fn check_coverage(query: &GeoPolygon, footprints: &[BBox]) -> CoverageReport {
    let qb = query.bbox();
    let clamp_x = |x: f64| x.clamp(qb.min_lon, qb.max_lon);
    let clamp_y = |y: f64| y.clamp(qb.min_lat, qb.max_lat);
    let relevant: Vec<&BBox> = footprints.iter().filter(|f| f.intersects(&qb)).collect();

    let mut xs = vec![qb.min_lon, qb.max_lon];
    let mut ys = vec![qb.min_lat, qb.max_lat];
    for f in &relevant {
        xs.extend([clamp_x(f.min_lon), clamp_x(f.max_lon)]);
        ys.extend([clamp_y(f.min_lat), clamp_y(f.max_lat)]);
    }
    let xs = sorted_unique(xs);
    let ys = sorted_unique(ys);
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);

    let mut inside = vec![false; nx * ny];
    for f in &relevant {
        let (x0, x1) = cell_span(&xs, clamp_x(f.min_lon), clamp_x(f.max_lon));
        let (y0, y1) = cell_span(&ys, clamp_y(f.min_lat), clamp_y(f.max_lat));
        for j in y0..y1 {
            for i in x0..x1 {
                inside[j * nx + i] = true;
            }
        }
    }

    let tiny = 1e-12 * qb.area().max(f64::MIN_POSITIVE);
    let mut gap_area = 0.0;
    let mut gap = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if inside[j * nx + i] {
                continue;
            }
            let cell = BBox {
                min_lon: xs[i],
                min_lat: ys[j],
                max_lon: xs[i + 1],
                max_lat: ys[j + 1],
            };
            let a = planar::polygon_rect_area(query, &cell);
            if a > tiny {
                gap[j * nx + i] = true;
                gap_area += a;
            }
        }
    }

    let gaps = merge_cells(&gap, &xs, &ys);
    if gaps.is_empty() {
        gap_area = 0.0;
    }
    CoverageReport {
        covered: gaps.is_empty(),
        gaps,
        gap_area,
    }
}

/// Merges flagged cells into row runs, then stacks runs with identical
/// column extents in consecutive rows.
fn merge_cells(flag: &[bool], xs: &[f64], ys: &[f64]) -> Vec<BBox> {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    // open runs keyed by (i0, i1) -> starting row
    let mut open: Vec<(usize, usize, usize)> = Vec::new();
    let mut out = Vec::new();
    let close = |(i0, i1, j0): (usize, usize, usize), j1: usize, out: &mut Vec<BBox>| {
        out.push(BBox {
            min_lon: xs[i0],
            min_lat: ys[j0],
            max_lon: xs[i1],
            max_lat: ys[j1],
        })
    };
    for j in 0..=ny {
        let mut runs = Vec::new();
        if j < ny {
            let mut i = 0;
            while i < nx {
                if flag[j * nx + i] {
                    let start = i;
                    while i < nx && flag[j * nx + i] {
                        i += 1;
                    }
                    runs.push((start, i));
                } else {
                    i += 1;
                }
            }
        }
        let mut next = Vec::with_capacity(runs.len());
        for run in &open {
            if runs.contains(&(run.0, run.1)) {
                next.push(*run);
            } else {
                close(*run, j, &mut out);
            }
        }
        for &(i0, i1) in &runs {
            if !open.iter().any(|r| r.0 == i0 && r.1 == i1) {
                next.push((i0, i1, j));
            }
        }
        open = next;
    }
    out.sort_by(|a, b| {
        (a.min_lat, a.min_lon)
            .partial_cmp(&(b.min_lat, b.min_lon))
            .expect("finite coordinates")
    });
    out
}

/// Exact area of a union of rectangles: per x-slab, the merged length of the
/// y-intervals spanning it.
pub fn rect_union_area(rects: &[BBox]) -> f64 {
    let xs = sorted_unique(rects.iter().flat_map(|r| [r.min_lon, r.max_lon]).collect());
    let mut area = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        spans.clear();
        spans.extend(
            rects
                .iter()
                .filter(|r| r.min_lon <= x0 && r.max_lon >= x1 && r.max_lat > r.min_lat)
                .map(|r| (r.min_lat, r.max_lat)),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut len = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(a, b) in &spans[1..] {
            if a > hi {
                len += hi - lo;
                (lo, hi) = (a, b);
            } else {
                hi = hi.max(b);
            }
        }
        len += hi - lo;
        area += len * (x1 - x0);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bb(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    fn rect_poly(b: BBox) -> GeoPolygon {
        GeoPolygon::from_bbox(&b).unwrap()
    }

    #[test]
    fn exact_cover() {
        let r = check_coverage(&rect_poly(bb(0.0, 0.0, 1.0, 1.0)), &[bb(0.0, 0.0, 1.0, 1.0)]);
        assert!(r.covered);
        assert_eq!(r.gap_area, 0.0);
        assert!(r.gaps.is_empty());
    }

    #[test]
    fn half_covered_strip() {
        let r = check_coverage(&rect_poly(bb(0.0, 0.0, 2.0, 1.0)), &[bb(0.0, 0.0, 1.0, 1.0)]);
        assert!(!r.covered);
        assert_eq!(r.gaps, vec![bb(1.0, 0.0, 2.0, 1.0)]);
        assert!((r.gap_area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_footprints_gap_is_query_bbox() {
        let q = rect_poly(bb(3.0, 4.0, 5.0, 7.0));
        let r = check_coverage(&q, &[]);
        assert_eq!(r.gaps, vec![bb(3.0, 4.0, 5.0, 7.0)]);
        assert!((r.gap_area - 6.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_touch_is_not_a_gap() {
        // triangle whose hypotenuse only grazes the uncovered corner cell
        let tri = GeoPolygon::new(
            vec![
                GeoPoint::new(0.0, 0.0),
                GeoPoint::new(2.0, 0.0),
                GeoPoint::new(0.0, 2.0),
            ],
            vec![],
        )
        .unwrap();
        let r = check_coverage(
            &tri,
            &[bb(0.0, 0.0, 1.0, 2.0), bb(1.0, 0.0, 2.0, 1.0)],
        );
        assert!(r.covered, "{r:?}");
    }

    #[test]
    fn l_shaped_gap_merges_into_two_rects() {
        let r = check_coverage(&rect_poly(bb(0.0, 0.0, 2.0, 2.0)), &[bb(0.0, 0.0, 1.0, 1.0)]);
        assert_eq!(r.gaps, vec![bb(1.0, 0.0, 2.0, 1.0), bb(0.0, 1.0, 2.0, 2.0)]);
        assert!((r.gap_area - 3.0).abs() < 1e-12);
    }

    #[test]
    fn union_area_examples() {
        assert_eq!(rect_union_area(&[]), 0.0);
        let u = bb(0.0, 0.0, 1.0, 1.0);
        assert_eq!(rect_union_area(&[u, u]), 1.0);
        assert!((rect_union_area(&[u, bb(0.5, 0.5, 1.5, 1.5)]) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn union_area_vs_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rects: Vec<BBox> = (0..50)
            .map(|_| {
                let (x, y) = (rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0));
                bb(x, y, x + rng.gen_range(0.1..2.0), y + rng.gen_range(0.1..2.0))
            })
            .collect();
        let exact = rect_union_area(&rects);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let p = GeoPoint::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
                rects.iter().any(|r| r.contains_point(&p))
            })
            .count();
        let est = 100.0 * hits as f64 / n as f64;
        assert!((est - exact).abs() / exact < 0.005, "{est} vs {exact}");
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0f64..4.0, 0.0f64..4.0, 0.1f64..3.0, 0.1f64..3.0)
            .prop_map(|(x, y, w, h)| bb(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn coverage_invariants(q in arb_box(), fps in prop::collection::vec(arb_box(), 0..8), extra in arb_box()) {
            let poly = rect_poly(q);
            let r = check_coverage(&poly, &fps);
            prop_assert_eq!(r.covered, r.gaps.is_empty());
            prop_assert_eq!(r.covered, r.gap_area == 0.0);
            for (i, a) in r.gaps.iter().enumerate() {
                for b in &r.gaps[i + 1..] {
                    prop_assert!(a.overlap(b).is_none());
                }
            }
            // rectangle query: gap area == query area - covered part
            let clipped: Vec<BBox> = fps.iter().filter_map(|f| f.intersection(&q)).collect();
            let covered = rect_union_area(&clipped);
            prop_assert!((r.gap_area + covered - poly.area()).abs() < 1e-9);

            let mut more = fps.clone();
            more.push(extra);
            prop_assert!(check_coverage(&poly, &more).gap_area <= r.gap_area + 1e-12);

            let mut rev = fps.clone();
            rev.reverse();
            prop_assert_eq!(&check_coverage(&poly, &rev), &r);

            more.push(q);
            prop_assert!(check_coverage(&poly, &more).covered);
        }
    }
}
