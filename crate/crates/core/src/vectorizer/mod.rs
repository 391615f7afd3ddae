//! Raster tile to geo-referenced boundary fragments.
//!
//! `remove_textures → binarize → trace_boundaries → px_to_geo → simplify`.
//! Traced pixel-centre contours are pushed half a pixel outward so that a
//! block of `n × n` pixels comes back as an `n × n` pixel square.

mod simplify;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BBox, GeoPoint, RasterTile};
use crate::planar;

pub use simplify::simplify;
pub use trace::{trace_boundaries, BinaryGrid, Edge, PixelContour};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorizeError {
    #[error("mask rect {rect:?} exceeds {width}x{height} tile `{id}`")]
    MaskOutOfBounds {
        id: String,
        rect: [u32; 4],
        width: usize,
        height: usize,
    },
    #[error("invalid vectorize parameter: {0}")]
    InvalidParams(String),
}

/// Watermark regions as half-open pixel rectangles `[c0, r0, c1, r1]`
/// covering columns `c0..c1` and rows `r0..r1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampMask {
    pub rects: Vec<[u32; 4]>,
}

impl StampMask {
    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn validate(&self, id: &str, width: usize, height: usize) -> Result<(), VectorizeError> {
        for r in &self.rects {
            let [c0, r0, c1, r1] = r.map(|v| v as usize);
            if c0 > c1 || r0 > r1 || c1 > width || r1 > height {
                return Err(VectorizeError::MaskOutOfBounds {
                    id: id.to_string(),
                    rect: *r,
                    width,
                    height,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, col: usize, row: usize) -> bool {
        self.rects.iter().any(|r| {
            let [c0, r0, c1, r1] = r.map(|v| v as usize);
            col >= c0 && col < c1 && row >= r0 && row < r1
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorizeParams {
    pub threshold: u8,
    /// Douglas–Peucker tolerance in degrees; `None` means a quarter of the
    /// tile's pixel width.
    pub simplify_eps: Option<f64>,
    pub min_object_px: usize,
}

impl Default for VectorizeParams {
    fn default() -> Self {
        Self {
            threshold: 128,
            simplify_eps: None,
            min_object_px: 16,
        }
    }
}

impl VectorizeParams {
    pub fn eps_for(&self, lon_per_px: f64) -> f64 {
        self.simplify_eps.unwrap_or(0.25 * lon_per_px)
    }

    pub fn validate(&self) -> Result<(), VectorizeError> {
        match self.simplify_eps {
            Some(e) if !(e >= 0.0 && e.is_finite()) => Err(VectorizeError::InvalidParams(
                format!("simplify_eps must be finite and >= 0, got {e}"),
            )),
            _ => Ok(()),
        }
    }
}

/// A piece of an object boundary in geo coordinates.
///
/// Closed fragments repeat their first point and carry no edge tags. Open
/// fragments end on tile sides named by `start_edge`/`end_edge`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFragment {
    pub points: Vec<GeoPoint>,
    pub closed: bool,
    /// Sorted, de-duplicated ids of the tiles this boundary came from.
    pub source_tiles: Vec<String>,
    pub start_edge: Option<Edge>,
    pub end_edge: Option<Edge>,
}

impl BoundaryFragment {
    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.points.iter()).expect("fragments are never empty")
    }

    pub fn length(&self) -> f64 {
        planar::polyline_length(&self.points)
    }

    /// Lexicographically smallest `(lon, lat)` point.
    pub fn min_point(&self) -> GeoPoint {
        *self
            .points
            .iter()
            .min_by(|a, b| a.lex_cmp(b))
            .expect("fragments are never empty")
    }

    pub fn first(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn last(&self) -> GeoPoint {
        *self.points.last().expect("fragments are never empty")
    }
}

/// Replaces every masked pixel with the nearest unmasked pixel of its row
/// (ties go left). Rows that are masked end to end are left as they are.
pub fn remove_textures(tile: &RasterTile, mask: &StampMask) -> Result<RasterTile, VectorizeError> {
    let (w, h) = (tile.width(), tile.height());
    mask.validate(&tile.meta.id, w, h)?;
    if mask.is_empty() {
        return Ok(tile.clone());
    }
    let src = tile.pixels();
    let mut out = src.to_vec();
    let mut masked = vec![false; w];
    for r in 0..h {
        masked.iter_mut().for_each(|m| *m = false);
        for rect in &mask.rects {
            let [c0, r0, c1, r1] = rect.map(|v| v as usize);
            if r >= r0 && r < r1 {
                masked[c0..c1].iter_mut().for_each(|m| *m = true);
            }
        }
        let row = &src[r * w..(r + 1) * w];
        let mut c = 0;
        while c < w {
            if !masked[c] {
                c += 1;
                continue;
            }
            let a = c;
            while c < w && masked[c] {
                c += 1;
            }
            let left = a.checked_sub(1);
            let right = (c < w).then_some(c);
            for k in a..c {
                let pick = match (left, right) {
                    (Some(l), Some(rr)) => Some(if k - l <= rr - k { l } else { rr }),
                    (Some(l), None) => Some(l),
                    (None, Some(rr)) => Some(rr),
                    (None, None) => None,
                };
                if let Some(p) = pick {
                    out[r * w + k] = row[p];
                }
            }
        }
    }
    Ok(tile.with_pixels(out))
}

pub fn binarize(tile: &RasterTile, threshold: u8) -> BinaryGrid {
    BinaryGrid::new(
        tile.width(),
        tile.height(),
        tile.pixels().iter().map(|&v| v >= threshold).collect(),
    )
}

pub fn vectorize_tile(
    tile: &RasterTile,
    mask: &StampMask,
    params: &VectorizeParams,
) -> Result<Vec<BoundaryFragment>, VectorizeError> {
    params.validate()?;
    let cleaned = remove_textures(tile, mask)?;
    let grid = binarize(&cleaned, params.threshold);
    let transform = tile.transform();
    let eps = params.eps_for(transform.lon_per_px);
    let mut out = Vec::new();
    for c in trace_boundaries(&grid, params.min_object_px) {
        let geo: Vec<GeoPoint> = c
            .points
            .iter()
            .zip(&c.normals)
            .map(|(&(x, y), &(nx, ny))| transform.px_to_geo(x + 0.5 * nx, y + 0.5 * ny))
            .collect();
        let simplified = simplify(&geo, eps);
        let mut points = planar::remove_loops(&simplified, c.closed);
        if c.closed {
            if points.len() < 3 {
                continue;
            }
            points.push(points[0]);
        } else if points.len() < 2 {
            continue;
        }
        out.push(BoundaryFragment {
            points,
            closed: c.closed,
            source_tiles: vec![tile.meta.id.clone()],
            start_edge: c.start_edge,
            end_edge: c.end_edge,
        });
    }
    Ok(out)
}
