//! Translation-only iterative closest point.

use crate::geo::GeoPoint;

use super::{RigidShift, StitchError, StitchParams};

fn nearest_within(p: &GeoPoint, pts: &[GeoPoint], radius: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (k, q) in pts.iter().enumerate() {
        let d = p.dist(q);
        if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    best.map(|(_, k)| k)
}

/// Shift that moves `b_pts` onto `a_pts`.
///
/// Each round pairs shifted `b` points with `a` points that are mutual
/// nearest neighbours within `icp_match_radius` and moves by the mean
/// residual, until the step drops below `icp_conv_tol` or `icp_max_iter`
/// rounds have run. Mutual pairing keeps points that only one side has from
/// dragging the estimate.
pub fn register_points(
    a_pts: &[GeoPoint],
    b_pts: &[GeoPoint],
    params: &StitchParams,
) -> Result<RigidShift, StitchError> {
    let radius = params.icp_match_radius;
    let (mut dx, mut dy) = (0.0, 0.0);
    for iter in 0..params.icp_max_iter.max(1) {
        let moved: Vec<GeoPoint> = b_pts
            .iter()
            .map(|p| GeoPoint::new(p.lon + dx, p.lat + dy))
            .collect();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (k, m) in moved.iter().enumerate() {
            let Some(qi) = nearest_within(m, a_pts, radius) else {
                continue;
            };
            let q = a_pts[qi];
            if nearest_within(&q, &moved, radius) != Some(k) {
                continue;
            }
            sx += q.lon - m.lon;
            sy += q.lat - m.lat;
            n += 1;
        }
        if n == 0 {
            if iter == 0 {
                return Err(StitchError::NoCorrespondences);
            }
            break;
        }
        let (stepx, stepy) = (sx / n as f64, sy / n as f64);
        dx += stepx;
        dy += stepy;
        if dx.hypot(dy) > radius {
            return Err(StitchError::ShiftTooLarge {
                dx,
                dy,
                limit: radius,
            });
        }
        if stepx.hypot(stepy) < params.icp_conv_tol {
            break;
        }
    }
    Ok(RigidShift { dx, dy })
}
