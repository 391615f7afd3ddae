//! Tile catalog: ingest metadata and answer rectangular range queries.

mod rtree;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BBox, GeoError, RasterTile, TileMeta};
use crate::tilefile::{self, TileFileError};

pub use rtree::PackedRTree;

/// Leaf (and inner node) capacity of the packed index.
pub const LEAF_FANOUT: usize = 16;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate tile id `{0}`")]
    DuplicateId(String),
    #[error("invalid tile metadata for `{id}`: {reason}")]
    InvalidMeta { id: String, reason: String },
    #[error("unknown tile id `{0}`")]
    UnknownId(String),
    #[error("raster for `{id}` is missing: {reason}")]
    MissingRaster { id: String, reason: String },
    #[error("raster for `{id}` does not match its metadata: {reason}")]
    DimensionMismatch { id: String, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeQuery {
    pub window: BBox,
}

/// Immutable set of tiles plus a spatial index over their footprints.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, TileMeta>,
    ids: Vec<String>,
    index: PackedRTree,
    tiles_root: Option<PathBuf>,
}

pub fn build_catalog(metas: Vec<TileMeta>) -> Result<Catalog, CatalogError> {
    let mut entries = BTreeMap::new();
    for meta in metas {
        meta.validate().map_err(|e| match e {
            GeoError::InvalidMeta { id, reason } => CatalogError::InvalidMeta { id, reason },
            other => CatalogError::InvalidMeta {
                id: meta.id.clone(),
                reason: other.to_string(),
            },
        })?;
        if entries.contains_key(&meta.id) {
            return Err(CatalogError::DuplicateId(meta.id));
        }
        entries.insert(meta.id.clone(), meta);
    }
    // BTreeMap order makes the packing independent of ingestion order.
    let ids: Vec<String> = entries.keys().cloned().collect();
    let boxes = entries.values().map(|m| m.bbox()).collect();
    let index = PackedRTree::build(boxes, LEAF_FANOUT);
    Ok(Catalog {
        entries,
        ids,
        index,
        tiles_root: None,
    })
}

/// Ids of tiles whose footprint meets the query window, sorted.
pub fn range_query(catalog: &Catalog, q: &RangeQuery) -> Vec<String> {
    let mut ids: Vec<String> = catalog
        .index
        .search(&q.window)
        .into_iter()
        .map(|i| catalog.ids[i].clone())
        .collect();
    ids.sort();
    ids
}

pub fn load_tiles(
    catalog: &Catalog,
    ids: &[String],
    root_dir: &Path,
) -> Result<Vec<RasterTile>, CatalogError> {
    ids.iter()
        .map(|id| {
            let meta = catalog
                .get(id)
                .ok_or_else(|| CatalogError::UnknownId(id.clone()))?;
            tilefile::read_raster(root_dir, meta).map_err(|e| match e {
                TileFileError::Geo(g @ GeoError::DimensionMismatch { .. }) => {
                    CatalogError::DimensionMismatch {
                        id: id.clone(),
                        reason: g.to_string(),
                    }
                }
                TileFileError::Pgm { reason, .. } => CatalogError::DimensionMismatch {
                    id: id.clone(),
                    reason,
                },
                other => CatalogError::MissingRaster {
                    id: id.clone(),
                    reason: other.to_string(),
                },
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tiles_root: Option<PathBuf>,
    tiles: Vec<TileMeta>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TileMeta> {
        self.entries.get(id)
    }

    pub fn metas(&self) -> impl Iterator<Item = &TileMeta> {
        self.entries.values()
    }

    pub fn index(&self) -> &PackedRTree {
        &self.index
    }

    /// Directory holding the tile payloads, when recorded at ingest time.
    pub fn tiles_root(&self) -> Option<&Path> {
        self.tiles_root.as_deref()
    }

    pub fn with_tiles_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.tiles_root = Some(root.into());
        self
    }

    pub fn query(&self, window: BBox) -> Vec<String> {
        range_query(self, &RangeQuery { window })
    }

    /// Serializes tile metadata (the index is rebuilt on load).
    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            tiles_root: self.tiles_root.clone(),
            tiles: self.entries.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        fs::write(path, self.to_json()).map_err(|source| CatalogError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads a catalog file. A relative `tiles_root` is resolved against the
    /// catalog file's directory.
    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: CatalogFile = serde_json::from_str(&text).map_err(|e| CatalogError::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut catalog = build_catalog(file.tiles)?;
        let base = path.parent().unwrap_or(Path::new("."));
        catalog.tiles_root = Some(match file.tiles_root {
            Some(r) if r.is_absolute() => r,
            Some(r) => base.join(r),
            None => base.to_path_buf(),
        });
        Ok(catalog)
    }
}

/// Parses a JSON-lines manifest: one `TileMeta` object per non-blank line.
pub fn parse_manifest(text: &str) -> Result<Vec<TileMeta>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| TileMeta::from_json(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Vec<TileMeta>, CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text).map_err(|reason| CatalogError::Format {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn manifest_text(metas: &[TileMeta]) -> String {
    metas.iter().map(|m| m.to_json() + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::vectorizer::StampMask;
    use proptest::prelude::*;

    pub(crate) fn tile(id: &str, b: BBox, w: u32, h: u32) -> TileMeta {
        TileMeta {
            id: id.into(),
            nw: GeoPoint::new(b.min_lon, b.max_lat),
            ne: GeoPoint::new(b.max_lon, b.max_lat),
            sw: GeoPoint::new(b.min_lon, b.min_lat),
            se: GeoPoint::new(b.max_lon, b.min_lat),
            width_px: w,
            height_px: h,
            acquired_at: "2015-06-01T00:00:00Z".parse().unwrap(),
        }
    }

    fn bb(a: f64, b: f64, c: f64, d: f64) -> BBox {
        BBox::new(a, b, c, d).unwrap()
    }

    fn grid2x2() -> Vec<TileMeta> {
        vec![
            tile("nw", bb(30.0, 35.4, 31.1, 36.5), 10, 10),
            tile("ne", bb(30.9, 35.4, 32.0, 36.5), 10, 10),
            tile("sw", bb(30.0, 34.5, 31.1, 35.6), 10, 10),
            tile("se", bb(30.9, 34.5, 32.0, 35.6), 10, 10),
        ]
    }

    fn brute(metas: &[TileMeta], q: &BBox) -> Vec<String> {
        let mut v: Vec<String> = metas
            .iter()
            .filter(|m| m.bbox().intersects(q))
            .map(|m| m.id.clone())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn empty_catalog() {
        let c = build_catalog(vec![]).unwrap();
        assert!(c.is_empty());
        assert!(c.query(bb(-180.0, -90.0, 180.0, 90.0)).is_empty());
    }

    #[test]
    fn four_tile_grid() {
        let c = build_catalog(grid2x2()).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.query(bb(30.95, 35.45, 31.05, 35.55)), vec!["ne", "nw", "se", "sw"]);
        assert_eq!(c.query(bb(30.1, 36.0, 30.2, 36.1)), vec!["nw"]);
        assert!(c.query(bb(40.0, 40.0, 41.0, 41.0)).is_empty());
    }

    #[test]
    fn edge_touch_counts() {
        let c = build_catalog(vec![
            tile("a", bb(0.0, 0.0, 1.0, 1.0), 4, 4),
            tile("b", bb(2.0, 0.0, 3.0, 1.0), 4, 4),
        ])
        .unwrap();
        assert_eq!(c.query(bb(1.0, 0.5, 2.0, 0.6)), vec!["a", "b"]);
        assert_eq!(c.query(bb(0.0, 0.0, 1.0, 1.0)), vec!["a"]);
    }

    #[test]
    fn duplicate_and_invalid_rejected() {
        let mut metas = grid2x2();
        metas.push(metas[0].clone());
        assert!(matches!(build_catalog(metas), Err(CatalogError::DuplicateId(id)) if id == "nw"));
        let mut bad = tile("bad", bb(0.0, 0.0, 1.0, 1.0), 4, 4);
        bad.ne.lat += 0.1;
        assert!(matches!(build_catalog(vec![bad]), Err(CatalogError::InvalidMeta { .. })));
    }

    #[test]
    fn load_tiles_errors() {
        let dir = tempfile::tempdir().unwrap();
        let metas = grid2x2();
        for m in &metas {
            let r = RasterTile::new(m.clone(), vec![7; 100]).unwrap();
            tilefile::write_tile(dir.path(), &r, &StampMask::default()).unwrap();
        }
        let c = build_catalog(metas.clone()).unwrap();
        let ids: Vec<String> = metas.iter().map(|m| m.id.clone()).collect();
        let tiles = load_tiles(&c, &ids, dir.path()).unwrap();
        assert_eq!(tiles.len(), 4);
        assert!(tiles.iter().all(|t| t.width() == 10 && t.height() == 10));

        assert!(matches!(
            load_tiles(&c, &["zz".to_string()], dir.path()),
            Err(CatalogError::UnknownId(_))
        ));
        std::fs::write(
            tilefile::raster_path(dir.path(), "nw"),
            tilefile::encode_pgm(5, 20, &[0; 100]),
        )
        .unwrap();
        assert!(matches!(
            load_tiles(&c, &["nw".to_string()], dir.path()),
            Err(CatalogError::DimensionMismatch { .. })
        ));
        std::fs::remove_file(tilefile::raster_path(dir.path(), "ne")).unwrap();
        assert!(matches!(
            load_tiles(&c, &["ne".to_string()], dir.path()),
            Err(CatalogError::MissingRaster { .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        let c = build_catalog(grid2x2()).unwrap().with_tiles_root("tiles");
        c.save(&path).unwrap();
        let back = Catalog::load(&path).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.tiles_root(), Some(dir.path().join("tiles").as_path()));
        assert_eq!(back.get("se"), c.get("se"));
    }

    #[test]
    fn manifest_round_trip() {
        let metas = grid2x2();
        assert_eq!(parse_manifest(&manifest_text(&metas)).unwrap(), metas);
        assert!(parse_manifest("{\"id\":\"x\"}\n").is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0f64..10.0, 0.0f64..10.0, 0.0f64..2.0, 0.0f64..2.0)
            .prop_map(|(x, y, w, h)| bb(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_order_independent(
            boxes in prop::collection::vec(arb_box(), 0..200),
            queries in prop::collection::vec(arb_box(), 1..10),
            rot in 0usize..200,
        ) {
            let metas: Vec<TileMeta> = boxes
                .iter()
                .enumerate()
                .filter(|(_, b)| b.width() > 0.0 && b.height() > 0.0)
                .map(|(i, b)| tile(&format!("t{i:04}"), *b, 8, 8))
                .collect();
            let mut rotated = metas.clone();
            if !rotated.is_empty() {
                let k = rot % rotated.len();
                rotated.rotate_left(k);
                rotated.reverse();
            }
            let a = build_catalog(metas.clone()).unwrap();
            let b = build_catalog(rotated).unwrap();
            for q in &queries {
                let got = a.query(*q);
                prop_assert_eq!(&got, &brute(&metas, q));
                prop_assert_eq!(&got, &b.query(*q));
                // enlarging the window never drops ids
                let bigger = a.query(q.expand(0.5));
                prop_assert!(got.iter().all(|id| bigger.contains(id)));
            }
        }
    }
}
