//! The three-stage stitch job: vectorize and stitch per tile row, stitch
//! across rows, close rings.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::format::{
    fragment_from_json, fragment_to_json, polygon_feature_to_json, FormatError,
};
use crate::geo::{BBox, GeoPolygon, RasterTile};
use crate::stitcher::{close_rings_tagged, stitch_group, StitchMode, StitchParams};
use crate::vectorizer::{vectorize_tile, BoundaryFragment, StampMask, VectorizeParams};

use super::engine::{IdentityMapper, KeyedRecord, Mapper, Reducer, Seq, Stage, StagePlan};
use super::MapReduceError;

pub const ALL_KEY: &str = "all";
pub const POLYGONS_KEY: &str = "polygons";
pub const LEFTOVERS_KEY: &str = "leftovers";

/// Shared read-only inputs of the stitch job.
#[derive(Debug)]
pub struct StitchJob {
    pub tiles: BTreeMap<String, (RasterTile, StampMask)>,
    pub tile_bboxes: BTreeMap<String, BBox>,
    pub vectorize: VectorizeParams,
    pub stitch: StitchParams,
    pub mode: StitchMode,
}

impl StitchJob {
    pub fn new(
        tiles: Vec<(RasterTile, StampMask)>,
        vectorize: VectorizeParams,
        stitch: StitchParams,
        mode: StitchMode,
    ) -> Self {
        let tile_bboxes = tiles.iter().map(|(t, _)| (t.meta.id.clone(), t.meta.bbox())).collect();
        let tiles = tiles.into_iter().map(|(t, m)| (t.meta.id.clone(), (t, m))).collect();
        Self {
            tiles,
            tile_bboxes,
            vectorize,
            stitch,
            mode,
        }
    }
}

fn decode(records: &[KeyedRecord]) -> Result<Vec<BoundaryFragment>, String> {
    records
        .iter()
        .map(|r| fragment_from_json(&r.payload))
        .collect::<Result<_, FormatError>>()
        .map_err(|e| e.to_string())
}

fn encode(key: &str, frags: &[BoundaryFragment]) -> Vec<KeyedRecord> {
    frags
        .iter()
        .enumerate()
        .map(|(i, f)| KeyedRecord::new(key, Seq::new(key, i as u64), fragment_to_json(f)))
        .collect()
}

/// Tile id → row key, rows numbered by descending north edge.
fn row_keys(job: &StitchJob) -> BTreeMap<String, String> {
    let mut lats: Vec<f64> = job.tiles.values().map(|(t, _)| t.meta.nw.lat).collect();
    lats.sort_by(|a, b| b.total_cmp(a));
    lats.dedup();
    job.tiles
        .iter()
        .map(|(id, (t, _))| {
            let row = lats.iter().position(|&l| l == t.meta.nw.lat).expect("row exists");
            (id.clone(), format!("row-{row:06}"))
        })
        .collect()
}

struct VectorizeMapper {
    job: Arc<StitchJob>,
    rows: BTreeMap<String, String>,
}

impl Mapper for VectorizeMapper {
    fn id(&self) -> &str {
        "vectorize"
    }

    fn map(&self, record: &KeyedRecord) -> Result<Vec<KeyedRecord>, String> {
        let id = &record.payload;
        let (tile, mask) = self.job.tiles.get(id).ok_or_else(|| format!("unknown tile `{id}`"))?;
        let frags = vectorize_tile(tile, mask, &self.job.vectorize).map_err(|e| e.to_string())?;
        let key = &self.rows[id];
        Ok(frags
            .iter()
            .enumerate()
            .map(|(i, f)| KeyedRecord::new(key.as_str(), Seq::new(id.as_str(), i as u64), fragment_to_json(f)))
            .collect())
    }
}

struct RekeyMapper(&'static str);

impl Mapper for RekeyMapper {
    fn id(&self) -> &str {
        "rekey"
    }

    fn map(&self, record: &KeyedRecord) -> Result<Vec<KeyedRecord>, String> {
        Ok(vec![KeyedRecord::new(self.0, record.seq.clone(), record.payload.clone())])
    }
}

struct StitchReducer(Arc<StitchJob>);

impl Reducer for StitchReducer {
    fn id(&self) -> &str {
        "stitch_group"
    }

    fn reduce(&self, key: &str, records: &[KeyedRecord]) -> Result<Vec<KeyedRecord>, String> {
        let job = &self.0;
        let out = stitch_group(decode(records)?, &job.tile_bboxes, &job.stitch, job.mode);
        Ok(encode(key, &out))
    }
}

struct CloseReducer(Arc<StitchJob>);

impl Reducer for CloseReducer {
    fn id(&self) -> &str {
        "close_rings"
    }

    fn reduce(&self, _key: &str, records: &[KeyedRecord]) -> Result<Vec<KeyedRecord>, String> {
        let frags = decode(records)?;
        let (polys, leftovers) =
            close_rings_tagged(&frags, self.0.stitch.join_tol).map_err(|e| e.to_string())?;
        let mut out: Vec<KeyedRecord> = polys
            .iter()
            .enumerate()
            .map(|(i, (p, tiles))| {
                KeyedRecord::new(POLYGONS_KEY, Seq::new(POLYGONS_KEY, i as u64), polygon_feature_to_json(p, tiles))
            })
            .collect();
        out.extend(encode(LEFTOVERS_KEY, &leftovers));
        Ok(out)
    }
}

/// Plan and stage-1 input records for the tiles of `job` whose footprints
/// meet the query's bbox.
pub fn plan_stitch_pipeline(
    query: &GeoPolygon,
    job: Arc<StitchJob>,
    workers: usize,
) -> Result<(StagePlan, Vec<KeyedRecord>), MapReduceError> {
    let qb = query.bbox();
    let rows = row_keys(&job);
    let inputs: Vec<KeyedRecord> = job
        .tile_bboxes
        .iter()
        .filter(|(_, b)| b.intersects(&qb))
        .map(|(id, _)| KeyedRecord::new(id.as_str(), Seq::new(id.as_str(), 0), id.as_str()))
        .collect();
    if inputs.is_empty() {
        return Err(MapReduceError::EmptySelection);
    }
    let plan = StagePlan {
        stages: vec![
            Stage {
                mapper: Arc::new(VectorizeMapper {
                    job: job.clone(),
                    rows,
                }),
                reducer: Arc::new(StitchReducer(job.clone())),
            },
            Stage {
                mapper: Arc::new(RekeyMapper(ALL_KEY)),
                reducer: Arc::new(StitchReducer(job.clone())),
            },
            Stage {
                mapper: Arc::new(IdentityMapper),
                reducer: Arc::new(CloseReducer(job)),
            },
        ],
        workers,
    };
    plan.validate()?;
    Ok((plan, inputs))
}
