use std::fs;
use std::path::Path;

use tileforge_core::catalog::Catalog;
use tileforge_core::format::parse_geojson;
use tileforge_core::geo::{BBox, GeoPoint, GeoPolygon};
use tileforge_core::mapreduce::KeyedRecord;
use tileforge_core::pipeline::{run_pipeline, OutputFormat, PipelineConfig, PipelineError};
use tileforge_core::stitcher::StitchMode;
use tileforge_core::synth::{generate, score_iou, write_scene, SceneSpec};
use tileforge_core::vectorizer::VectorizeParams;

fn scene(dir: &Path, grid: (usize, usize), islands: usize) -> SceneSpec {
    let mut spec = SceneSpec::square(GeoPoint::new(10.0, 50.0), grid, 160, 1e-4, 21);
    spec.n_islands = islands;
    write_scene(&generate(&spec).unwrap(), dir).unwrap();
    spec
}

fn config(dir: &Path, query: BBox, workers: usize) -> PipelineConfig {
    PipelineConfig {
        catalog_path: dir.join("catalog.json"),
        tiles_root: None,
        query: GeoPolygon::from_bbox(&query).unwrap(),
        mode: StitchMode::Lcsp,
        vectorize: VectorizeParams::default(),
        stitch: None,
        workers,
        output: None,
        format: OutputFormat::Geojson,
        dump_stages: None,
    }
}

#[test]
fn four_tiles_one_polygon() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (2, 2), 1);
    let mut cfg = config(dir.path(), spec.region, 2);
    cfg.output = Some(dir.path().join("out.geojson"));
    cfg.format = OutputFormat::Both;
    let r = run_pipeline(&cfg).unwrap();
    assert_eq!(r.polygons.len(), 1);
    assert_eq!(r.polygons[0].source_tiles.len(), 4);
    let truth = generate(&spec).unwrap().polygons;
    let got: Vec<GeoPolygon> = parse_geojson(&fs::read_to_string(dir.path().join("out.geojson")).unwrap())
        .unwrap()
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    assert!(score_iou(&got, &truth).mean >= 0.98);
    assert!(dir.path().join("out.wkt").is_file());
}

#[test]
fn timings_add_up_to_wall() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (3, 3), 2);
    let r = run_pipeline(&config(dir.path(), spec.region, 2)).unwrap();
    let names: Vec<&str> = r.timings.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["select", "coverage", "load", "stage1", "stage2", "stage3", "emit"]);
    let sum: f64 = r.timings.iter().map(|(_, d)| d.as_secs_f64()).sum();
    let wall = r.wall.as_secs_f64();
    assert!((sum - wall).abs() <= 0.05 * wall, "sum {sum} wall {wall}");
}

#[test]
fn output_identical_across_workers_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (3, 3), 2);
    let base = run_pipeline(&config(dir.path(), spec.region, 1)).unwrap().geojson();
    for workers in [1, 2, 4, 8] {
        let again = run_pipeline(&config(dir.path(), spec.region, workers)).unwrap();
        assert_eq!(again.geojson(), base);
        assert_eq!(again.wkt().lines().count(), 2);
    }
}

#[test]
fn missing_tile_reports_gap() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (2, 2), 1);
    let catalog = Catalog::load(&dir.path().join("catalog.json")).unwrap();
    let gone = catalog.get("tile_r00_c01").unwrap().bbox();
    fs::remove_file(dir.path().join("tile_r00_c01.pgm")).unwrap();
    match run_pipeline(&config(dir.path(), spec.region, 1)) {
        Err(e @ PipelineError::CoverageGap(_)) => {
            assert_eq!(e.exit_code(), 2);
            let PipelineError::CoverageGap(report) = e else { unreachable!() };
            assert!(!report.gaps.is_empty());
            assert!(report.gaps.iter().all(|g| gone.contains_bbox(g)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn disjoint_query_gap_is_the_query() {
    let dir = tempfile::tempdir().unwrap();
    scene(dir.path(), (1, 1), 1);
    let q = BBox::new(30.0, 10.0, 31.0, 11.0).unwrap();
    match run_pipeline(&config(dir.path(), q, 1)) {
        Err(PipelineError::CoverageGap(report)) => assert_eq!(report.gaps, vec![q]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn query_selects_whole_objects() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (2, 2), 1);
    let c = spec.region.center();
    let q = BBox::new(c.lon - 1e-4, c.lat - 1e-4, c.lon + 1e-4, c.lat + 1e-4).unwrap();
    let small = run_pipeline(&config(dir.path(), q, 1)).unwrap();
    let full = run_pipeline(&config(dir.path(), spec.region, 1)).unwrap();
    assert_eq!(small.polygons.len(), 1);
    assert_eq!(small.polygons[0].polygon, full.polygons[0].polygon);
}

#[test]
fn bad_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (1, 1), 1);
    let mut cfg = config(dir.path(), spec.region, 1);
    cfg.catalog_path = dir.path().join("nope.json");
    assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), 4);

    let cfg = config(dir.path(), spec.region, 1);
    fs::write(dir.path().join("tile_r00_c00.pgm"), b"P5\n3 3\n255\n").unwrap();
    assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), 4);
}

#[test]
fn stage_dumps_are_sorted_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scene(dir.path(), (2, 2), 1);
    let mut cfg = config(dir.path(), spec.region, 4);
    cfg.dump_stages = Some(dir.path().join("dump"));
    run_pipeline(&cfg).unwrap();
    let first = fs::read(dir.path().join("dump/stage-1.jsonl")).unwrap();
    for stage in 1..=3 {
        let text = fs::read_to_string(dir.path().join(format!("dump/stage-{stage}.jsonl"))).unwrap();
        let recs: Vec<KeyedRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(!recs.is_empty());
        assert!(recs.windows(2).all(|w| (&w[0].key, &w[0].seq) < (&w[1].key, &w[1].seq)));
    }
    cfg.workers = 1;
    run_pipeline(&cfg).unwrap();
    assert_eq!(fs::read(dir.path().join("dump/stage-1.jsonl")).unwrap(), first);
}
