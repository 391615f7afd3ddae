use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tileforge");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .env_remove("TILEFORGE_WORKERS")
        .output()
        .expect("run tileforge")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const REGION: &str = "--bbox=10,49.9728,10.0272,50";

/// A 2×2 scene of 160 px tiles: 0.0272° across.
fn synth(dir: &Path) {
    fs::write(
        dir.join("spec.json"),
        r#"{"region":[10.0,49.9728,10.0272,50.0],"grid":[2,2],"px_per_tile":[160,160],"seed":3}"#,
    )
    .unwrap();
    let o = run(dir, &["synth", "--spec", "spec.json", "--out", "scene"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_pipeline_score() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let o = run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION, "--out", "out.geojson", "--format", "both"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(d.join("out.wkt")).unwrap().starts_with("POLYGON (("));

    let o = run(d, &["score", "--result", "out.geojson", "--truth", "scene/truth.geojson"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["mean"].as_f64().unwrap() >= 0.98);
}

#[test]
fn pipeline_to_stdout_matches_file_and_env_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let a = run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION, "--workers", "1"]);
    let b = Command::new(BIN)
        .current_dir(d)
        .args(["pipeline", "--catalog", "scene/catalog.json", REGION, "--out", "o.geojson"])
        .env("TILEFORGE_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    assert_eq!(stdout(&a), fs::read_to_string(d.join("o.geojson")).unwrap());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    // disjoint query
    let o = run(d, &["pipeline", "--catalog", "scene/catalog.json", "--bbox=40,0,41,1"]);
    assert_eq!(code(&o), 2);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["gaps"], serde_json::json!([[40.0, 0.0, 41.0, 1.0]]));
    // bad flags and inputs
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "scene/catalog.json"])), 4);
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "scene/catalog.json", "--bbox=1,2,3"])), 4);
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "missing.json", REGION])), 4);
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION, "--mode", "magic"])), 4);
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION, "--workers", "0"])), 4);
    assert_eq!(code(&run(d, &["frobnicate"])), 4);
    assert_eq!(code(&run(d, &["--help"])), 0);
    // missing raster
    fs::remove_file(d.join("scene/tile_r01_c01.pgm")).unwrap();
    assert_eq!(code(&run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION])), 2);
}

#[test]
fn ingest_query_coverage() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let o = run(d, &["ingest", "--manifest", "scene/manifest.jsonl", "--tiles", "scene", "--out", "cat.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(d, &["query", "--catalog", "cat.json", "--bbox=10,49.999,10.001,50"]);
    assert_eq!(stdout(&o), "tile_r00_c00\n");
    let o = run(d, &["query", "--catalog", "cat.json", REGION]);
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = run(d, &["coverage", "--catalog", "cat.json", REGION]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("\"covered\":true"));
    let o = run(d, &["coverage", "--catalog", "cat.json", "--bbox=9.99,49.98,10.01,50"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("\"covered\":false"));

    fs::write(
        d.join("q.geojson"),
        r#"{"type":"Polygon","coordinates":[[[10.001,49.99],[10.02,49.99],[10.01,49.999],[10.001,49.99]]]}"#,
    )
    .unwrap();
    let o = run(d, &["coverage", "--catalog", "cat.json", "--query", "q.geojson"]);
    assert_eq!(code(&o), 0);
    // the ingested catalog also drives the pipeline
    let o = run(d, &["pipeline", "--catalog", "cat.json", REGION, "--format", "wkt"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1);
    // the island reaches past the tiles this query selects
    let o = run(d, &["pipeline", "--catalog", "cat.json", "--query", "q.geojson"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn vectorize_then_stitch() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let mut files = Vec::new();
    for id in ["tile_r00_c00", "tile_r00_c01", "tile_r01_c00", "tile_r01_c01"] {
        let out = format!("{id}.frag.geojson");
        let o = run(d, &["vectorize", "--catalog", "scene/catalog.json", "--tile", id, "--out", &out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        files.push(out);
    }
    let mut args = vec!["stitch", "--catalog", "scene/catalog.json", "--fragments"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--out", "st.geojson"]);
    let o = run(d, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(d, &["score", "--result", "st.geojson", "--truth", "scene/truth.geojson"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["mean"].as_f64().unwrap() >= 0.98);

    // one tile's fragments alone stay open
    let o = run(d, &["stitch", "--catalog", "scene/catalog.json", "--fragments", &files[0]]);
    assert_eq!(code(&o), 3);
}

#[test]
fn dump_stages_writes_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let o = run(d, &["pipeline", "--catalog", "scene/catalog.json", REGION, "--out", "o.geojson", "--dump-stages", "dump"]);
    assert_eq!(code(&o), 0);
    for k in 1..=3 {
        let text = fs::read_to_string(d.join(format!("dump/stage-{k}.jsonl"))).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["key"].is_string() && v["seq"]["index"].is_u64());
        }
    }
}
