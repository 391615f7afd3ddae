//! End-to-end extraction: select tiles, check coverage, run the staged
//! stitch, keep polygons meeting the query, write the result.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::catalog::{self, range_query, Catalog, CatalogError, RangeQuery};
use crate::coverage::{check_coverage, CoverageReport};
use crate::format::{
    emit_geojson, emit_wkt, fragment_from_json, polygon_feature_from_json, PolygonProps,
};
use crate::geo::{GeoPolygon, RasterTile};
use crate::mapreduce::{
    plan_stitch_pipeline, run_mapreduce_observed, KeyedRecord, MapReduceError, StitchJob,
    LEFTOVERS_KEY, POLYGONS_KEY,
};
use crate::planar;
use crate::stitcher::{StitchMode, StitchParams};
use crate::tilefile::{self, raster_path};
use crate::vectorizer::{BoundaryFragment, StampMask, VectorizeParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Geojson,
    Wkt,
    Both,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geojson" => Ok(Self::Geojson),
            "wkt" => Ok(Self::Wkt),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown output format `{other}` (geojson, wkt, both)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub catalog_path: PathBuf,
    /// Overrides the tile directory recorded in the catalog.
    pub tiles_root: Option<PathBuf>,
    pub query: GeoPolygon,
    pub mode: StitchMode,
    pub vectorize: VectorizeParams,
    /// `None` scales the defaults to the finest selected pixel width.
    pub stitch: Option<StitchParams>,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub dump_stages: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedPolygon {
    pub polygon: GeoPolygon,
    pub source_tiles: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub polygons: Vec<ExtractedPolygon>,
    pub leftovers: Vec<BoundaryFragment>,
    pub coverage: CoverageReport,
    pub selected: Vec<String>,
    /// Consecutive named phases; they add up to `wall`.
    pub timings: Vec<(String, Duration)>,
    pub wall: Duration,
}

impl ExtractionResult {
    pub fn geojson(&self) -> String {
        let polys: Vec<GeoPolygon> = self.polygons.iter().map(|p| p.polygon.clone()).collect();
        let props: Vec<PolygonProps> = self
            .polygons
            .iter()
            .enumerate()
            .map(|(i, p)| PolygonProps {
                object_id: i,
                source_tiles: p.source_tiles.clone(),
                gap_area: self.coverage.gap_area,
            })
            .collect();
        emit_geojson(&polys, &props)
    }

    pub fn wkt(&self) -> String {
        let polys: Vec<GeoPolygon> = self.polygons.iter().map(|p| p.polygon.clone()).collect();
        emit_wkt(&polys)
    }

    pub fn timing(&self, name: &str) -> Option<Duration> {
        self.timings.iter().find(|(n, _)| n == name).map(|(_, d)| *d)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query is not fully covered: {} gap(s), gap area {}", .0.gaps.len(), .0.gap_area)]
    CoverageGap(CoverageReport),
    #[error("{} boundary fragment(s) could not be closed", .0.leftovers.len())]
    StitchIncomplete(Box<ExtractionResult>),
    #[error("stitching failed: {0}")]
    Stitch(MapReduceError),
    #[error("{0}")]
    InputFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::CoverageGap(_) => 2,
            PipelineError::StitchIncomplete(_) | PipelineError::Stitch(_) => 3,
            PipelineError::InputFormat(_) | PipelineError::Io { .. } => 4,
        }
    }
}

impl From<CatalogError> for PipelineError {
    fn from(e: CatalogError) -> Self {
        PipelineError::InputFormat(e.to_string())
    }
}

struct Clock {
    start: Instant,
    mark: Instant,
    laps: Vec<(String, Duration)>,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            mark: now,
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.laps.push((name.to_string(), now - self.mark));
        self.mark = now;
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Output files for `format`: GeoJSON at `out`, WKT at `out` for `wkt` and
/// next to it with a `.wkt` extension for `both`.
pub fn output_paths(out: &Path, format: OutputFormat) -> Vec<(PathBuf, OutputFormat)> {
    match format {
        OutputFormat::Both => vec![
            (out.to_path_buf(), OutputFormat::Geojson),
            (out.with_extension("wkt"), OutputFormat::Wkt),
        ],
        f => vec![(out.to_path_buf(), f)],
    }
}

fn write_outputs(result: &ExtractionResult, out: &Path, format: OutputFormat) -> Result<(), PipelineError> {
    for (path, f) in output_paths(out, format) {
        let text = match f {
            OutputFormat::Wkt => result.wkt(),
            _ => result.geojson(),
        };
        write_file(&path, &text)?;
    }
    Ok(())
}

fn load_selected(
    catalog: &Catalog,
    ids: &[String],
    root: &Path,
) -> Result<Vec<(RasterTile, StampMask)>, PipelineError> {
    let rasters = catalog::load_tiles(catalog, ids, root)?;
    rasters
        .into_iter()
        .map(|t| {
            let mask = tilefile::read_mask_or_empty(root, &t.meta.id)
                .map_err(|e| PipelineError::InputFormat(e.to_string()))?;
            mask.validate(&t.meta.id, t.width(), t.height())
                .map_err(|e| PipelineError::InputFormat(e.to_string()))?;
            Ok((t, mask))
        })
        .collect()
}

fn dump_stage(dir: &Path, stage: usize, records: &[KeyedRecord]) -> Result<(), String> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).map_err(|e| e.to_string())?);
        text.push('\n');
    }
    let path = dir.join(format!("stage-{}.jsonl", stage + 1));
    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs the whole extraction and writes the output when `cfg.output` is set.
///
/// Tiles whose raster file is missing are dropped from the selection with
/// a warning, so the coverage check reports their footprints as gaps.
/// When fragments remain open the closed polygons are still written and
/// the result comes back inside [`PipelineError::StitchIncomplete`].
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<ExtractionResult, PipelineError> {
    let mut clock = Clock::new();
    let catalog = Catalog::load(&cfg.catalog_path)?;
    let root = cfg
        .tiles_root
        .clone()
        .or_else(|| catalog.tiles_root().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    if !root.is_dir() {
        return Err(PipelineError::InputFormat(format!(
            "tile directory {} does not exist",
            root.display()
        )));
    }
    cfg.vectorize
        .validate()
        .map_err(|e| PipelineError::InputFormat(e.to_string()))?;
    if let Some(p) = &cfg.stitch {
        p.validate().map_err(|e| PipelineError::InputFormat(e.to_string()))?;
    }

    let window = cfg.query.bbox();
    let mut selected = range_query(&catalog, &RangeQuery { window });
    selected.retain(|id| {
        let present = raster_path(&root, id).is_file();
        if !present {
            log::warn!("tile `{id}` has no raster under {}; leaving it out", root.display());
        }
        present
    });
    clock.lap("select");

    let footprints: Vec<_> = selected.iter().map(|id| catalog.get(id).expect("selected").bbox()).collect();
    let coverage = check_coverage(&cfg.query, &footprints);
    clock.lap("coverage");
    if !coverage.covered {
        return Err(PipelineError::CoverageGap(coverage));
    }

    let tiles = load_selected(&catalog, &selected, &root)?;
    let stitch = cfg.stitch.unwrap_or_else(|| {
        let px = tiles
            .iter()
            .map(|(t, _)| t.transform().lon_per_px)
            .fold(f64::INFINITY, f64::min);
        StitchParams::for_pixel(px)
    });
    let job = Arc::new(StitchJob::new(tiles, cfg.vectorize.clone(), stitch, cfg.mode));
    let (plan, inputs) = plan_stitch_pipeline(&cfg.query, job, cfg.workers).map_err(PipelineError::Stitch)?;
    if let Some(dir) = &cfg.dump_stages {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    clock.lap("load");

    let mut observer = |k: usize, recs: &[KeyedRecord]| match &cfg.dump_stages {
        Some(dir) => dump_stage(dir, k, recs),
        None => Ok(()),
    };
    let (records, reports) =
        run_mapreduce_observed(inputs, &plan, &mut observer).map_err(PipelineError::Stitch)?;
    for (k, r) in reports.iter().enumerate() {
        clock.laps.push((format!("stage{}", k + 1), r.total()));
        log::info!(
            "stage {} ({} / {}): {} records, {} groups, {} out, map {:?} shuffle {:?} reduce {:?}",
            k + 1,
            r.mapper,
            r.reducer,
            r.input_records,
            r.groups,
            r.output_records,
            r.map,
            r.shuffle,
            r.reduce
        );
    }
    // whatever the engine did not attribute to a stage
    let now = Instant::now();
    let stages: Duration = reports.iter().map(|r| r.total()).sum();
    if let Some(last) = clock.laps.last_mut() {
        last.1 += (now - clock.mark).saturating_sub(stages);
    }
    clock.mark = now;

    let mut polygons = Vec::new();
    let mut leftovers = Vec::new();
    for r in &records {
        let bad = |e: crate::format::FormatError| PipelineError::Stitch(MapReduceError::ReducerFailure {
            stage: reports.len().saturating_sub(1),
            reducer: "close_rings".into(),
            key: r.key.clone(),
            cause: e.to_string(),
        });
        match r.key.as_str() {
            POLYGONS_KEY => {
                let (polygon, source_tiles) = polygon_feature_from_json(&r.payload).map_err(bad)?;
                if planar::polygons_intersect(&polygon, &cfg.query) {
                    polygons.push(ExtractedPolygon {
                        polygon,
                        source_tiles,
                    });
                }
            }
            LEFTOVERS_KEY => leftovers.push(fragment_from_json(&r.payload).map_err(bad)?),
            _ => {}
        }
    }
    polygons.sort_by(|a, b| {
        let (pa, pb) = (a.polygon.bbox(), b.polygon.bbox());
        pa.min_lon
            .total_cmp(&pb.min_lon)
            .then(pa.min_lat.total_cmp(&pb.min_lat))
            .then(a.source_tiles.cmp(&b.source_tiles))
    });

    let mut result = ExtractionResult {
        polygons,
        leftovers,
        coverage,
        selected,
        timings: Vec::new(),
        wall: Duration::ZERO,
    };
    if let Some(out) = &cfg.output {
        write_outputs(&result, out, cfg.format)?;
    }
    clock.lap("emit");
    result.timings = clock.laps;
    result.wall = clock.start.elapsed();
    if !result.leftovers.is_empty() {
        return Err(PipelineError::StitchIncomplete(Box::new(result)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let report = CoverageReport {
            covered: false,
            gaps: vec![],
            gap_area: 1.0,
        };
        assert_eq!(PipelineError::CoverageGap(report).exit_code(), 2);
        assert_eq!(PipelineError::Stitch(MapReduceError::EmptySelection).exit_code(), 3);
        assert_eq!(PipelineError::InputFormat("x".into()).exit_code(), 4);
    }

    #[test]
    fn output_paths_for_both() {
        let p = output_paths(Path::new("/tmp/out.geojson"), OutputFormat::Both);
        assert_eq!(p[1].0, PathBuf::from("/tmp/out.wkt"));
        assert_eq!("wkt".parse::<OutputFormat>(), Ok(OutputFormat::Wkt));
        assert!("shp".parse::<OutputFormat>().is_err());
    }
}
