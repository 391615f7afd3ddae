//! Synthetic scenes with known ground truth.
//!
//! Random star-convex islands are rasterized on one global pixel lattice
//! that every tile cuts a window from, so overlapping tiles agree pixel for
//! pixel. Randomness comes from ChaCha8 (`rand_chacha`): islands draw from a
//! generator seeded with `seed`, tile `i` (row-major) from one seeded with
//! `splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)`. Uniform floats take
//! the top 53 bits of `next_u64`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, build_catalog};
use crate::geo::{BBox, GeoPoint, GeoPolygon, RasterTile, TileMeta};
use crate::planar;
use crate::tilefile::{self, TileFileError};
use crate::vectorizer::StampMask;

pub const FOREGROUND: u8 = 200;
pub const BACKGROUND: u8 = 50;
pub const STAMP: u8 = 255;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    SpecInvalid(String),
    #[error(transparent)]
    TileFile(#[from] TileFileError),
    #[error(transparent)]
    Catalog(#[from] catalog::CatalogError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn default_overlap() -> f64 {
    0.15
}

fn default_true() -> bool {
    true
}

fn default_vertices() -> (usize, usize) {
    (8, 16)
}

fn default_islands() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub region: BBox,
    /// `(rows, cols)`.
    pub grid: (usize, usize),
    #[serde(default = "default_overlap")]
    pub overlap_frac: f64,
    /// `(width, height)` of every tile.
    pub px_per_tile: (u32, u32),
    #[serde(default = "default_islands")]
    pub n_islands: usize,
    /// Inclusive range of vertex counts per island.
    #[serde(default = "default_vertices")]
    pub island_vertices: (usize, usize),
    #[serde(default)]
    pub noise_flip_prob: f64,
    /// Per-tile intensity bias is drawn uniformly from `-jitter_px..=jitter_px`.
    #[serde(default)]
    pub jitter_px: u8,
    #[serde(default = "default_true")]
    pub stamp: bool,
    pub seed: u64,
    /// Outer island radius in degrees; defaults to `0.25 * min(region side)
    /// / sqrt(n_islands)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub island_size: Option<f64>,
}

impl SceneSpec {
    /// A `rows × cols` scene of square `px × px` tiles with square pixels of
    /// `deg_per_px` degrees, its NW corner at `nw`.
    pub fn square(nw: GeoPoint, grid: (usize, usize), px: u32, deg_per_px: f64, seed: u64) -> Self {
        let step = (px as f64 * (1.0 - default_overlap())).round();
        let w = (px as f64 + (grid.1 as f64 - 1.0) * step) * deg_per_px;
        let h = (px as f64 + (grid.0 as f64 - 1.0) * step) * deg_per_px;
        SceneSpec {
            region: BBox {
                min_lon: nw.lon,
                min_lat: nw.lat - h,
                max_lon: nw.lon + w,
                max_lat: nw.lat,
            },
            grid,
            overlap_frac: default_overlap(),
            px_per_tile: (px, px),
            n_islands: 1,
            island_vertices: default_vertices(),
            noise_flip_prob: 0.0,
            jitter_px: 0,
            stamp: true,
            seed,
            island_size: None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::SpecInvalid(m));
        let (rows, cols) = self.grid;
        if rows == 0 || cols == 0 {
            return bad(format!("grid must be at least 1x1, got {rows}x{cols}"));
        }
        if !(0.0..0.5).contains(&self.overlap_frac) {
            return bad(format!("overlap_frac must be in [0, 0.5), got {}", self.overlap_frac));
        }
        if !(0.0..=1.0).contains(&self.noise_flip_prob) {
            return bad(format!("noise_flip_prob must be in [0, 1], got {}", self.noise_flip_prob));
        }
        if self.px_per_tile.0 < 2 || self.px_per_tile.1 < 2 {
            return bad("tiles must be at least 2x2 pixels".into());
        }
        let (lo, hi) = self.island_vertices;
        if lo < 3 || lo > hi {
            return bad(format!("island_vertices must satisfy 3 <= min <= max, got ({lo}, {hi})"));
        }
        if self.region.width() <= 0.0 || self.region.height() <= 0.0 {
            return bad("region must have positive area".into());
        }
        if let Some(s) = self.island_size {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("island_size must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub polygons: Vec<GeoPolygon>,
    pub tiles: Vec<(RasterTile, StampMask)>,
    pub manifest: Vec<TileMeta>,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn tile_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mixed = splitmix64(seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn star_points(center: GeoPoint, radius: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<GeoPoint> {
    let tau = std::f64::consts::TAU;
    let mut ring: Vec<GeoPoint> = (0..n)
        .map(|i| {
            let a = (i as f64 + 0.1 + 0.8 * unit(rng)) * tau / n as f64;
            let r = radius * (0.6 + 0.4 * unit(rng));
            GeoPoint::new(center.lon + r * a.cos(), center.lat + r * a.sin())
        })
        .collect();
    ring.push(ring[0]);
    ring
}

/// Closed counter-clockwise star-convex ring: `n` vertices at stratified
/// angles around `center`, radii in `[0.6, 1.0] * radius`.
pub fn star_ring(center: GeoPoint, radius: f64, n: usize, seed: u64) -> Vec<GeoPoint> {
    star_points(center, radius, n.max(3), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Pixel lattice shared by all tiles of a scene.
struct Lattice {
    step: (usize, usize),
    total: (usize, usize),
    lon_px: f64,
    lat_px: f64,
}

impl Lattice {
    fn new(spec: &SceneSpec) -> Result<Self, SynthError> {
        let (w, h) = (spec.px_per_tile.0 as usize, spec.px_per_tile.1 as usize);
        let (rows, cols) = spec.grid;
        let sx = (w as f64 * (1.0 - spec.overlap_frac)).round() as usize;
        let sy = (h as f64 * (1.0 - spec.overlap_frac)).round() as usize;
        if sx == 0 || sy == 0 {
            return Err(SynthError::SpecInvalid("tile step rounds to zero pixels".into()));
        }
        let total = (w + (cols - 1) * sx, h + (rows - 1) * sy);
        Ok(Lattice {
            step: (sx, sy),
            total,
            lon_px: spec.region.width() / total.0 as f64,
            lat_px: spec.region.height() / total.1 as f64,
        })
    }

    fn lon(&self, region: &BBox, i: usize) -> f64 {
        if i == self.total.0 {
            region.max_lon
        } else {
            region.min_lon + i as f64 * self.lon_px
        }
    }

    fn lat(&self, region: &BBox, j: usize) -> f64 {
        if j == self.total.1 {
            region.min_lat
        } else {
            region.max_lat - j as f64 * self.lat_px
        }
    }
}

fn place_islands(spec: &SceneSpec, lat: &Lattice) -> Result<Vec<GeoPolygon>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let region = spec.region;
    let n = spec.n_islands;
    if n == 0 {
        return Ok(Vec::new());
    }
    let radius = spec
        .island_size
        .unwrap_or(0.25 * region.width().min(region.height()) / (n as f64).sqrt());
    let margin = 3.0 * lat.lon_px.max(lat.lat_px);
    let free = region.expand(-(radius + margin));
    if free.width() <= 0.0 && n > 1 || free.height() <= 0.0 && n > 1 {
        return Err(SynthError::SpecInvalid(format!("{n} islands of radius {radius} do not fit the region")));
    }
    let (vlo, vhi) = spec.island_vertices;
    let mut centers: Vec<GeoPoint> = Vec::new();
    if n == 1 {
        if radius + margin > 0.5 * region.width().min(region.height()) {
            return Err(SynthError::SpecInvalid(format!("island radius {radius} does not fit the region")));
        }
        centers.push(region.center());
    } else {
        for _ in 0..n {
            let mut placed = false;
            for _ in 0..1000 {
                let c = GeoPoint::new(
                    free.min_lon + unit(&mut rng) * free.width(),
                    free.min_lat + unit(&mut rng) * free.height(),
                );
                if centers.iter().all(|q| q.dist(&c) > 2.0 * radius + margin) {
                    centers.push(c);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(SynthError::SpecInvalid(format!(
                    "could not place {n} non-overlapping islands of radius {radius}"
                )));
            }
        }
    }
    centers
        .into_iter()
        .map(|c| {
            let nv = vlo + (rng.next_u64() % (vhi - vlo + 1) as u64) as usize;
            let ring = star_points(c, radius, nv, &mut rng);
            GeoPolygon::new(ring, Vec::new())
                .map_err(|e| SynthError::SpecInvalid(format!("generated island invalid: {e}")))
        })
        .collect()
}

fn rasterize(polys: &[GeoPolygon], region: &BBox, lat: &Lattice) -> Vec<u8> {
    let (tw, th) = lat.total;
    let boxes: Vec<BBox> = polys.iter().map(|p| p.bbox()).collect();
    let mut out = vec![BACKGROUND; tw * th];
    for j in 0..th {
        let y = region.max_lat - (j as f64 + 0.5) * lat.lat_px;
        for i in 0..tw {
            let p = GeoPoint::new(region.min_lon + (i as f64 + 0.5) * lat.lon_px, y);
            if polys
                .iter()
                .zip(&boxes)
                .any(|(poly, b)| b.contains_point(&p) && planar::point_in_polygon(&p, poly))
            {
                out[j * tw + i] = FOREGROUND;
            }
        }
    }
    out
}

/// Watermark rectangles near the bottom-left and bottom-right corners.
pub fn stamp_rects(w: u32, h: u32) -> Vec<[u32; 4]> {
    let at = |f: f64, n: u32| ((f * n as f64).round() as u32).min(n);
    let (r0, r1) = (at(0.93, h), at(0.96, h));
    vec![
        [at(0.06, w), r0, at(0.16, w), r1],
        [at(0.84, w), r0, at(0.94, w), r1],
    ]
}

pub fn tile_id(row: usize, col: usize) -> String {
    format!("tile_r{row:02}_c{col:02}")
}

pub fn generate(spec: &SceneSpec) -> Result<GroundTruth, SynthError> {
    spec.validate()?;
    let lat = Lattice::new(spec)?;
    let polygons = place_islands(spec, &lat)?;
    let global = rasterize(&polygons, &spec.region, &lat);
    let (w, h) = (spec.px_per_tile.0 as usize, spec.px_per_tile.1 as usize);
    let base: DateTime<Utc> = "2015-06-01T00:00:00Z".parse().expect("valid timestamp");
    let (rows, cols) = spec.grid;
    let mut tiles = Vec::with_capacity(rows * cols);
    let mut manifest = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let idx = r * cols + c;
            let (x0, y0) = (c * lat.step.0, r * lat.step.1);
            let region = &spec.region;
            let (west, east) = (lat.lon(region, x0), lat.lon(region, x0 + w));
            let (north, south) = (lat.lat(region, y0), lat.lat(region, y0 + h));
            let meta = TileMeta {
                id: tile_id(r, c),
                nw: GeoPoint::new(west, north),
                ne: GeoPoint::new(east, north),
                sw: GeoPoint::new(west, south),
                se: GeoPoint::new(east, south),
                width_px: w as u32,
                height_px: h as u32,
                acquired_at: base + Duration::hours(idx as i64),
            };
            let mut rng = tile_rng(spec.seed, idx);
            let bias = if spec.jitter_px > 0 {
                let span = 2 * spec.jitter_px as u64 + 1;
                (rng.next_u64() % span) as i32 - spec.jitter_px as i32
            } else {
                0
            };
            let mut pixels = Vec::with_capacity(w * h);
            for row in 0..h {
                let src = &global[(y0 + row) * lat.total.0 + x0..][..w];
                for &v in src {
                    let mut v = v;
                    if spec.noise_flip_prob > 0.0 && unit(&mut rng) < spec.noise_flip_prob {
                        v = if v == FOREGROUND { BACKGROUND } else { FOREGROUND };
                    }
                    pixels.push((v as i32 + bias).clamp(0, 255) as u8);
                }
            }
            let mut mask = StampMask::default();
            if spec.stamp {
                mask.rects = stamp_rects(w as u32, h as u32);
                for [c0, r0, c1, r1] in &mask.rects {
                    for row in *r0 as usize..*r1 as usize {
                        pixels[row * w + *c0 as usize..row * w + *c1 as usize].fill(STAMP);
                    }
                }
            }
            meta.validate()
                .map_err(|e| SynthError::SpecInvalid(format!("generated tile invalid: {e}")))?;
            let tile = RasterTile::new(meta.clone(), pixels)
                .map_err(|e| SynthError::SpecInvalid(e.to_string()))?;
            manifest.push(meta);
            tiles.push((tile, mask));
        }
    }
    Ok(GroundTruth {
        polygons,
        tiles,
        manifest,
    })
}

/// Writes `manifest.jsonl`, `catalog.json`, per-tile sidecars and
/// `truth.geojson` into `dir`.
pub fn write_scene(truth: &GroundTruth, dir: &Path) -> Result<(), SynthError> {
    let io_err = |path: PathBuf| move |source| SynthError::Io { path, source };
    fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
    for (tile, mask) in &truth.tiles {
        tilefile::write_tile(dir, tile, mask)?;
    }
    let p = dir.join("manifest.jsonl");
    fs::write(&p, catalog::manifest_text(&truth.manifest)).map_err(io_err(p.clone()))?;
    build_catalog(truth.manifest.clone())?
        .with_tiles_root(".")
        .save(&dir.join("catalog.json"))?;
    let p = dir.join("truth.geojson");
    let text = crate::format::emit_geojson(&truth.polygons, &[]);
    fs::write(&p, text).map_err(io_err(p.clone()))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouEntry {
    pub result: Option<usize>,
    pub truth: Option<usize>,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IouScore {
    pub per_polygon: Vec<IouEntry>,
    pub mean: f64,
}

/// Greedy one-to-one matching by highest IoU. Unmatched polygons on either
/// side score 0; two empty inputs score a mean of 1.
pub fn score_iou(result: &[GeoPolygon], truth: &[GeoPolygon]) -> IouScore {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in result.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let v = planar::iou(r, t);
            if v > 0.0 {
                pairs.push((v, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; result.len()];
    let mut used_t = vec![false; truth.len()];
    let mut entries = Vec::new();
    for (v, i, j) in pairs {
        if !used_r[i] && !used_t[j] {
            used_r[i] = true;
            used_t[j] = true;
            entries.push(IouEntry {
                result: Some(i),
                truth: Some(j),
                iou: v,
            });
        }
    }
    entries.extend((0..result.len()).filter(|&i| !used_r[i]).map(|i| IouEntry {
        result: Some(i),
        truth: None,
        iou: 0.0,
    }));
    entries.extend((0..truth.len()).filter(|&j| !used_t[j]).map(|j| IouEntry {
        result: None,
        truth: Some(j),
        iou: 0.0,
    }));
    let mean = if entries.is_empty() {
        1.0
    } else {
        entries.iter().map(|e| e.iou).sum::<f64>() / entries.len() as f64
    };
    IouScore {
        per_polygon: entries,
        mean,
    }
}
