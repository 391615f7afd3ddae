use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tileforge_core::catalog::{self, build_catalog, range_query, Catalog, RangeQuery};
use tileforge_core::coverage::check_coverage;
use tileforge_core::format::{
    emit_geojson, emit_wkt, fragments_from_collection, fragments_to_collection, parse_geojson,
    parse_query, PolygonProps,
};
use tileforge_core::geo::{BBox, GeoPolygon};
use tileforge_core::pipeline::{output_paths, run_pipeline, OutputFormat, PipelineConfig, PipelineError};
use tileforge_core::stitcher::{close_rings_tagged, stitch_group, StitchMode, StitchParams};
use tileforge_core::synth::{generate, score_iou, write_scene, SceneSpec};
use tileforge_core::tilefile;
use tileforge_core::vectorizer::{vectorize_tile, VectorizeParams};

const EXIT_GAP: u8 = 2;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "tileforge", version, about = "Extract whole objects from overlapping geo-referenced tiles")]
struct Cli {
    /// More log output on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalog from a JSON-lines manifest of tile metadata.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding the tile rasters.
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the ids of tiles meeting a query window.
    Query {
        #[arg(long)]
        catalog: PathBuf,
        #[command(flatten)]
        region: Region,
    },
    /// Check whether catalog footprints cover a query; exits 2 when not.
    Coverage {
        #[arg(long)]
        catalog: PathBuf,
        #[command(flatten)]
        region: Region,
    },
    /// Vectorize one tile into boundary fragments.
    Vectorize {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        tile: String,
        #[arg(long)]
        tiles: Option<PathBuf>,
        #[command(flatten)]
        vec: VecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stitch fragment files into polygons; exits 3 when fragments stay open.
    Stitch {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long = "fragments", required = true, num_args = 1..)]
        fragments: Vec<PathBuf>,
        #[arg(long, default_value = "lcsp")]
        mode: StitchMode,
        #[arg(long)]
        stitch_params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "geojson")]
        format: OutputFormat,
    },
    /// Select, check coverage, vectorize, stitch and emit.
    Pipeline(PipelineArgs),
    /// Generate a synthetic scene with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score result polygons against ground truth by IoU.
    Score {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Region {
    /// Query polygon as GeoJSON.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Query window `min_lon,min_lat,max_lon,max_lat`.
    #[arg(long, value_parser = parse_bbox, allow_hyphen_values = true)]
    bbox: Option<BBox>,
}

#[derive(Args)]
struct VecArgs {
    #[arg(long, default_value_t = 128)]
    threshold: u8,
    /// Simplification tolerance in degrees (default: a quarter pixel).
    #[arg(long)]
    simplify_eps: Option<f64>,
    #[arg(long, default_value_t = 16)]
    min_object_px: usize,
}

impl VecArgs {
    fn params(&self) -> VectorizeParams {
        VectorizeParams {
            threshold: self.threshold,
            simplify_eps: self.simplify_eps,
            min_object_px: self.min_object_px,
        }
    }
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    catalog: PathBuf,
    /// Tile directory (default: the one recorded in the catalog).
    #[arg(long)]
    tiles: Option<PathBuf>,
    #[command(flatten)]
    region: Region,
    #[arg(long, default_value = "lcsp")]
    mode: StitchMode,
    #[arg(long, env = "TILEFORGE_WORKERS")]
    workers: Option<usize>,
    /// Output file (default: GeoJSON on standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "geojson")]
    format: OutputFormat,
    /// Write each stage's shuffled input as JSON lines into this directory.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
    #[command(flatten)]
    vec: VecArgs,
    /// JSON file with stitch parameters (default: scaled to the pixel size).
    #[arg(long)]
    stitch_params: Option<PathBuf>,
}

fn parse_bbox(s: &str) -> Result<BBox, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 4 {
        return Err(format!("expected 4 comma-separated numbers, got {}", v.len()));
    }
    BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn query_polygon(region: &Region) -> Result<GeoPolygon> {
    match (&region.query, &region.bbox) {
        (Some(p), _) => Ok(parse_query(&read(p)?).with_context(|| format!("query {}", p.display()))?),
        (None, Some(b)) => Ok(GeoPolygon::from_bbox(b)?),
        (None, None) => bail!("give --query or --bbox"),
    }
}

fn load_catalog(path: &Path) -> Result<Catalog> {
    Ok(Catalog::load(path)?)
}

fn stitch_params(file: Option<&Path>, px: f64) -> Result<StitchParams> {
    let p = match file {
        Some(f) => serde_json::from_str(&read(f)?).with_context(|| format!("parsing {}", f.display()))?,
        None => StitchParams::for_pixel(px),
    };
    p.validate()?;
    Ok(p)
}

fn emit(polys: &[(GeoPolygon, Vec<String>)], out: Option<&Path>, format: OutputFormat) -> Result<()> {
    let shapes: Vec<GeoPolygon> = polys.iter().map(|(p, _)| p.clone()).collect();
    let props: Vec<PolygonProps> = polys
        .iter()
        .enumerate()
        .map(|(i, (_, t))| PolygonProps {
            object_id: i,
            source_tiles: t.clone(),
            gap_area: 0.0,
        })
        .collect();
    let text_for = |f: OutputFormat| match f {
        OutputFormat::Wkt => emit_wkt(&shapes),
        _ => emit_geojson(&shapes, &props),
    };
    match out {
        Some(out) => {
            for (path, f) in output_paths(out, format) {
                write(&path, &text_for(f))?;
            }
        }
        None if format == OutputFormat::Both => bail!("--format both needs --out"),
        None => print!("{}", text_for(format)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ingest { manifest, tiles, out } => {
            let metas = catalog::read_manifest(&manifest)?;
            for m in &metas {
                if !tilefile::raster_path(&tiles, &m.id).is_file() {
                    log::warn!("tile `{}` has no raster under {}", m.id, tiles.display());
                }
            }
            let root = fs::canonicalize(&tiles).with_context(|| format!("tile directory {}", tiles.display()))?;
            let cat = build_catalog(metas)?.with_tiles_root(root);
            cat.save(&out)?;
            log::info!("catalog of {} tiles written to {}", cat.len(), out.display());
        }
        Command::Query { catalog, region } => {
            let cat = load_catalog(&catalog)?;
            let window = query_polygon(&region)?.bbox();
            for id in range_query(&cat, &RangeQuery { window }) {
                println!("{id}");
            }
        }
        Command::Coverage { catalog, region } => {
            let cat = load_catalog(&catalog)?;
            let query = query_polygon(&region)?;
            let ids = range_query(&cat, &RangeQuery { window: query.bbox() });
            let footprints: Vec<BBox> = ids.iter().map(|id| cat.get(id).expect("indexed").bbox()).collect();
            let report = check_coverage(&query, &footprints);
            println!("{}", serde_json::to_string(&report)?);
            if !report.covered {
                return Ok(EXIT_GAP);
            }
        }
        Command::Vectorize { catalog, tile, tiles, vec, out } => {
            let cat = load_catalog(&catalog)?;
            let root = tiles
                .or_else(|| cat.tiles_root().map(Path::to_path_buf))
                .ok_or_else(|| anyhow!("no tile directory; pass --tiles"))?;
            let raster = catalog::load_tiles(&cat, std::slice::from_ref(&tile), &root)?.remove(0);
            let mask = tilefile::read_mask_or_empty(&root, &tile)?;
            let frags = vectorize_tile(&raster, &mask, &vec.params())?;
            let text = fragments_to_collection(&frags);
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Stitch {
            catalog,
            fragments,
            mode,
            stitch_params: params_file,
            out,
            format,
        } => {
            let cat = load_catalog(&catalog)?;
            let mut frags = Vec::new();
            for f in &fragments {
                frags.extend(fragments_from_collection(&read(f)?).with_context(|| format!("parsing {}", f.display()))?);
            }
            let mut tile_bboxes = BTreeMap::new();
            for f in &frags {
                for id in &f.source_tiles {
                    let meta = cat.get(id).ok_or_else(|| anyhow!("fragment names unknown tile `{id}`"))?;
                    tile_bboxes.insert(id.clone(), meta.bbox());
                }
            }
            let px = tile_bboxes
                .keys()
                .map(|id| cat.get(id).expect("checked").transform().lon_per_px)
                .fold(f64::INFINITY, f64::min);
            let params = stitch_params(params_file.as_deref(), if px.is_finite() { px } else { 1.0 })?;
            let stitched = stitch_group(frags, &tile_bboxes, &params, mode);
            let (polys, leftovers) = close_rings_tagged(&stitched, params.join_tol)?;
            emit(&polys, out.as_deref(), format)?;
            if !leftovers.is_empty() {
                log::error!("{} fragment(s) could not be closed", leftovers.len());
                return Ok(EXIT_INCOMPLETE);
            }
        }
        Command::Pipeline(args) => return pipeline(args),
        Command::Synth { spec, out } => {
            let spec: SceneSpec =
                serde_json::from_str(&read(&spec)?).with_context(|| format!("parsing {}", spec.display()))?;
            let truth = generate(&spec)?;
            write_scene(&truth, &out)?;
            log::info!("{} tiles, {} islands written to {}", truth.tiles.len(), truth.polygons.len(), out.display());
        }
        Command::Score { result, truth } => {
            let load = |p: &Path| -> Result<Vec<GeoPolygon>> {
                Ok(parse_geojson(&read(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?
                    .into_iter()
                    .map(|(g, _)| g)
                    .collect())
            };
            let score = score_iou(&load(&result)?, &load(&truth)?);
            println!("{}", serde_json::to_string(&score)?);
        }
    }
    Ok(0)
}

fn pipeline(args: PipelineArgs) -> Result<u8> {
    let workers = match args.workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if args.out.is_none() && args.format == OutputFormat::Both {
        bail!("--format both needs --out");
    }
    let stitch = match &args.stitch_params {
        Some(f) => Some(stitch_params(Some(f), 1.0)?),
        None => None,
    };
    let cfg = PipelineConfig {
        catalog_path: args.catalog,
        tiles_root: args.tiles,
        query: query_polygon(&args.region)?,
        mode: args.mode,
        vectorize: args.vec.params(),
        stitch,
        workers,
        output: args.out.clone(),
        format: args.format,
        dump_stages: args.dump_stages,
    };
    let (result, code) = match run_pipeline(&cfg) {
        Ok(r) => (r, 0),
        Err(PipelineError::StitchIncomplete(r)) => {
            log::error!("{} boundary fragment(s) could not be closed", r.leftovers.len());
            (*r, EXIT_INCOMPLETE)
        }
        Err(PipelineError::CoverageGap(report)) => {
            log::error!(
                "query not covered: {} gap(s), gap area {}",
                report.gaps.len(),
                report.gap_area
            );
            println!("{}", serde_json::to_string(&report)?);
            return Ok(EXIT_GAP);
        }
        Err(e) => return Err(e.into()),
    };
    if args.out.is_none() {
        let text = match args.format {
            OutputFormat::Wkt => result.wkt(),
            _ => result.geojson(),
        };
        print!("{text}");
    }
    for (name, d) in &result.timings {
        log::info!("{name}: {:.3} ms", d.as_secs_f64() * 1e3);
    }
    log::info!(
        "{} polygon(s) from {} tile(s) in {:.3} ms",
        result.polygons.len(),
        result.selected.len(),
        result.wall.as_secs_f64() * 1e3
    );
    Ok(code)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<PipelineError>() {
        Some(p) => p.exit_code() as u8,
        None => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
