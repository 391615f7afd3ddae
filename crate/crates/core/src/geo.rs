//! Coordinates, footprints, rings and tile metadata shared by every stage.
//!
//! Longitude/latitude are WGS84 degrees treated as planar Cartesian `x`/`y`.
//! Pixel `(0, 0)` is the NW corner of a tile and rows grow southward.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planar;

/// Tolerance (degrees) for the axis-aligned corner check on [`TileMeta`].
pub const CORNER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: ({lon}, {lat})")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("invalid bbox: {0}")]
    InvalidBBox(String),
    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid tile metadata for `{id}`: {reason}")]
    InvalidMeta { id: String, reason: String },
    #[error("raster for `{id}` is {got_w}x{got_h}, metadata says {want_w}x{want_h}")]
    DimensionMismatch {
        id: String,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    /// Builds a point, rejecting coordinates outside the WGS84 domain.
    pub fn checked(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let p = Self::new(lon, lat);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat);
        if ok {
            Ok(())
        } else {
            Err(GeoError::OutOfRange {
                lon: self.lon,
                lat: self.lat,
            })
        }
    }

    pub fn dist(&self, other: &GeoPoint) -> f64 {
        (self.lon - other.lon).hypot(self.lat - other.lat)
    }

    pub fn midpoint(&self, other: &GeoPoint) -> GeoPoint {
        GeoPoint::new(
            0.5 * (self.lon + other.lon),
            0.5 * (self.lat + other.lat),
        )
    }

    /// Total lexicographic order on (lon, lat).
    pub fn lex_cmp(&self, other: &GeoPoint) -> std::cmp::Ordering {
        self.lon
            .total_cmp(&other.lon)
            .then(self.lat.total_cmp(&other.lat))
    }
}

impl From<[f64; 2]> for GeoPoint {
    fn from(v: [f64; 2]) -> Self {
        GeoPoint::new(v[0], v[1])
    }
}

impl From<GeoPoint> for [f64; 2] {
    fn from(p: GeoPoint) -> Self {
        [p.lon, p.lat]
    }
}

/// Axis-aligned rectangle in degrees. Zero-area boxes are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        let b = BBox {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        };
        if ![min_lon, min_lat, max_lon, max_lat]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeoError::InvalidBBox(format!("non-finite bound in {b:?}")));
        }
        if min_lon > max_lon || min_lat > max_lat {
            return Err(GeoError::InvalidBBox(format!("inverted bounds in {b:?}")));
        }
        Ok(b)
    }

    /// Smallest box containing every point. `None` for an empty input.
    pub fn from_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a GeoPoint>,
    {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min_lon: first.lon,
            min_lat: first.lat,
            max_lon: first.lon,
            max_lat: first.lat,
        };
        for p in it {
            b.min_lon = b.min_lon.min(p.lon);
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lon = b.max_lon.max(p.lon);
            b.max_lat = b.max_lat.max(p.lat);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Closed intersection test: shared edges and corners count.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        if !self.intersects(other) {
            return None;
        }
        Some(BBox {
            min_lon: self.min_lon.max(other.min_lon),
            min_lat: self.min_lat.max(other.min_lat),
            max_lon: self.max_lon.min(other.max_lon),
            max_lat: self.max_lat.min(other.max_lat),
        })
    }

    /// Intersection with strictly positive area.
    pub fn overlap(&self, other: &BBox) -> Option<BBox> {
        self.intersection(other)
            .filter(|b| b.width() > 0.0 && b.height() > 0.0)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_lon: self.min_lon.min(other.min_lon),
            min_lat: self.min_lat.min(other.min_lat),
            max_lon: self.max_lon.max(other.max_lon),
            max_lat: self.max_lat.max(other.max_lat),
        }
    }

    pub fn contains_point(&self, p: &GeoPoint) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn contains_bbox(&self, other: &BBox) -> bool {
        other.min_lon >= self.min_lon
            && other.max_lon <= self.max_lon
            && other.min_lat >= self.min_lat
            && other.max_lat <= self.max_lat
    }

    /// Grows (or, for negative `d`, shrinks) the box on every side.
    /// A shrink past zero size collapses onto the center.
    pub fn expand(&self, d: f64) -> BBox {
        let mut b = BBox {
            min_lon: self.min_lon - d,
            min_lat: self.min_lat - d,
            max_lon: self.max_lon + d,
            max_lat: self.max_lat + d,
        };
        if b.min_lon > b.max_lon {
            let c = 0.5 * (self.min_lon + self.max_lon);
            b.min_lon = c;
            b.max_lon = c;
        }
        if b.min_lat > b.max_lat {
            let c = 0.5 * (self.min_lat + self.max_lat);
            b.min_lat = c;
            b.max_lat = c;
        }
        b
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(
            0.5 * (self.min_lon + self.max_lon),
            0.5 * (self.min_lat + self.max_lat),
        )
    }

    /// Closed counter-clockwise ring of the four corners.
    pub fn ring(&self) -> Vec<GeoPoint> {
        vec![
            GeoPoint::new(self.min_lon, self.min_lat),
            GeoPoint::new(self.max_lon, self.min_lat),
            GeoPoint::new(self.max_lon, self.max_lat),
            GeoPoint::new(self.min_lon, self.max_lat),
            GeoPoint::new(self.min_lon, self.min_lat),
        ]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeoError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.min_lon, b.min_lat, b.max_lon, b.max_lat]
    }
}

/// Open chain of at least two points with no consecutive duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoPolyline {
    points: Vec<GeoPoint>,
}

impl GeoPolyline {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        let points = dedup_consecutive(points);
        if points.len() < 2 {
            return Err(GeoError::InvalidPolyline(format!(
                "need at least 2 distinct points, got {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<GeoPoint> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn dedup_consecutive(mut points: Vec<GeoPoint>) -> Vec<GeoPoint> {
    points.dedup();
    points
}

/// Polygon with closed rings: CCW exterior, CW holes, no self-intersections.
///
/// Construction normalizes closure, consecutive duplicates and orientation,
/// so normalizing an already-normalized polygon is a no-op.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoPolygon {
    exterior: Vec<GeoPoint>,
    holes: Vec<Vec<GeoPoint>>,
}

impl GeoPolygon {
    pub fn new(exterior: Vec<GeoPoint>, holes: Vec<Vec<GeoPoint>>) -> Result<Self, GeoError> {
        let exterior = normalize_ring(exterior, true)?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(h, false))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { exterior, holes })
    }

    pub fn from_bbox(b: &BBox) -> Result<Self, GeoError> {
        GeoPolygon::new(b.ring(), Vec::new())
    }

    pub fn exterior(&self) -> &[GeoPoint] {
        &self.exterior
    }

    pub fn holes(&self) -> &[Vec<GeoPoint>] {
        &self.holes
    }

    /// Exterior followed by holes.
    pub fn rings(&self) -> impl Iterator<Item = &[GeoPoint]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(|h| h.as_slice()))
    }

    pub fn bbox(&self) -> BBox {
        BBox::from_points(self.exterior.iter()).expect("exterior ring is never empty")
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }
}

fn normalize_ring(ring: Vec<GeoPoint>, ccw: bool) -> Result<Vec<GeoPoint>, GeoError> {
    for p in &ring {
        p.validate()?;
    }
    let mut pts = dedup_consecutive(ring);
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(GeoError::InvalidPolygon(format!(
            "ring needs at least 3 distinct points, got {}",
            pts.len()
        )));
    }
    let signed = planar::signed_area(&pts);
    if signed == 0.0 {
        return Err(GeoError::InvalidPolygon("ring has zero area".into()));
    }
    if (signed > 0.0) != ccw {
        pts.reverse();
    }
    if !planar::ring_is_simple(&pts) {
        return Err(GeoError::InvalidPolygon("ring self-intersects".into()));
    }
    let first = pts[0];
    pts.push(first);
    Ok(pts)
}

/// Shoelace area of the exterior minus the holes, never negative.
pub fn polygon_area(poly: &GeoPolygon) -> f64 {
    let ext = planar::signed_area(&poly.exterior).abs();
    let holes: f64 = poly.holes.iter().map(|h| planar::signed_area(h).abs()).sum();
    (ext - holes).max(0.0)
}

/// Geo-referenced tile descriptor as found in the `<id>.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileMeta {
    pub id: String,
    pub nw: GeoPoint,
    pub ne: GeoPoint,
    pub sw: GeoPoint,
    pub se: GeoPoint,
    pub width_px: u32,
    pub height_px: u32,
    pub acquired_at: DateTime<Utc>,
}

impl TileMeta {
    pub fn from_json(text: &str) -> Result<Self, GeoError> {
        let meta: TileMeta = serde_json::from_str(text).map_err(|e| GeoError::InvalidMeta {
            id: "<unparsed>".into(),
            reason: e.to_string(),
        })?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("TileMeta serializes")
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let bad = |reason: String| GeoError::InvalidMeta {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        for (name, p) in [("nw", self.nw), ("ne", self.ne), ("sw", self.sw), ("se", self.se)] {
            p.validate().map_err(|e| bad(format!("{name}: {e}")))?;
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(bad("pixel dimensions must be positive".into()));
        }
        let aligned = (self.nw.lat - self.ne.lat).abs() <= CORNER_TOL
            && (self.sw.lat - self.se.lat).abs() <= CORNER_TOL
            && (self.nw.lon - self.sw.lon).abs() <= CORNER_TOL
            && (self.ne.lon - self.se.lon).abs() <= CORNER_TOL;
        if !aligned {
            return Err(bad("corners are not an axis-aligned rectangle".into()));
        }
        if !(self.nw.lat > self.sw.lat) {
            return Err(bad("north edge must lie above south edge".into()));
        }
        if !(self.ne.lon > self.nw.lon) {
            return Err(bad("east edge must lie right of west edge".into()));
        }
        Ok(())
    }

    pub fn bbox(&self) -> BBox {
        bbox_of(self)
    }

    pub fn transform(&self) -> GeoTransform {
        GeoTransform::from_meta(self)
    }
}

pub fn bbox_of(meta: &TileMeta) -> BBox {
    BBox {
        min_lon: meta.sw.lon,
        min_lat: meta.sw.lat,
        max_lon: meta.ne.lon,
        max_lat: meta.ne.lat,
    }
}

/// North-up affine mapping between fractional pixels and degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoTransform {
    pub origin: GeoPoint,
    pub lon_per_px: f64,
    pub lat_per_px: f64,
}

impl GeoTransform {
    pub fn from_meta(meta: &TileMeta) -> Self {
        GeoTransform {
            origin: meta.nw,
            lon_per_px: (meta.ne.lon - meta.nw.lon) / meta.width_px as f64,
            lat_per_px: (meta.nw.lat - meta.sw.lat) / meta.height_px as f64,
        }
    }

    pub fn px_to_geo(&self, col: f64, row: f64) -> GeoPoint {
        GeoPoint::new(
            self.origin.lon + col * self.lon_per_px,
            self.origin.lat - row * self.lat_per_px,
        )
    }

    pub fn geo_to_px(&self, p: &GeoPoint) -> (f64, f64) {
        (
            (p.lon - self.origin.lon) / self.lon_per_px,
            (self.origin.lat - p.lat) / self.lat_per_px,
        )
    }
}

pub fn px_to_geo(transform: &GeoTransform, col: f64, row: f64) -> GeoPoint {
    transform.px_to_geo(col, row)
}

pub fn geo_to_px(transform: &GeoTransform, p: &GeoPoint) -> (f64, f64) {
    transform.geo_to_px(p)
}

/// 8-bit grayscale tile, row-major, `height_px` rows of `width_px` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterTile {
    pub meta: TileMeta,
    pixels: Vec<u8>,
}

impl RasterTile {
    pub fn new(meta: TileMeta, pixels: Vec<u8>) -> Result<Self, GeoError> {
        let (w, h) = (meta.width_px as usize, meta.height_px as usize);
        if pixels.len() != w * h {
            return Err(GeoError::DimensionMismatch {
                id: meta.id.clone(),
                got_w: w,
                got_h: if w == 0 { 0 } else { pixels.len() / w },
                want_w: w,
                want_h: h,
            });
        }
        Ok(Self { meta, pixels })
    }

    pub fn width(&self) -> usize {
        self.meta.width_px as usize
    }

    pub fn height(&self) -> usize {
        self.meta.height_px as usize
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width() + col]
    }

    pub fn transform(&self) -> GeoTransform {
        self.meta.transform()
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<u8>) -> RasterTile {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        RasterTile {
            meta: self.meta.clone(),
            pixels,
        }
    }
}
