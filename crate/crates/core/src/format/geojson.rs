use serde_json::Value;

use crate::geo::{GeoPoint, GeoPolygon};

use super::FormatError;

/// Per-polygon feature properties of an extraction result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolygonProps {
    pub object_id: usize,
    pub source_tiles: Vec<String>,
    pub gap_area: f64,
}

/// Fixed 9-decimal coordinate; negative zero prints as zero.
pub fn fmt_coord(x: f64) -> String {
    let s = format!("{x:.9}");
    if s == "-0.000000000" {
        "0.000000000".to_string()
    } else {
        s
    }
}

fn push_ring(out: &mut String, ring: &[GeoPoint]) {
    out.push('[');
    for (k, p) in ring.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push('[');
        out.push_str(&fmt_coord(p.lon));
        out.push(',');
        out.push_str(&fmt_coord(p.lat));
        out.push(']');
    }
    out.push(']');
}

/// One-line FeatureCollection of Polygon features. `props[i]` describes
/// `polys[i]`; missing entries default to `object_id = i`, no tiles, zero
/// gap area.
pub fn emit_geojson(polys: &[GeoPolygon], props: &[PolygonProps]) -> String {
    let mut out = String::from(r#"{"type":"FeatureCollection","features":["#);
    for (i, poly) in polys.iter().enumerate() {
        let fallback = PolygonProps {
            object_id: i,
            ..PolygonProps::default()
        };
        let p = props.get(i).unwrap_or(&fallback);
        if i > 0 {
            out.push(',');
        }
        out.push_str(r#"{"type":"Feature","properties":{"object_id":"#);
        out.push_str(&p.object_id.to_string());
        out.push_str(r#","source_tiles":"#);
        out.push_str(&serde_json::to_string(&p.source_tiles).expect("strings serialize"));
        out.push_str(r#","gap_area":"#);
        out.push_str(&serde_json::to_string(&p.gap_area).expect("finite gap area"));
        out.push_str(r#"},"geometry":{"type":"Polygon","coordinates":["#);
        for (k, ring) in poly.rings().enumerate() {
            if k > 0 {
                out.push(',');
            }
            push_ring(&mut out, ring);
        }
        out.push_str("]}}");
    }
    out.push_str("]}\n");
    out
}

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Json(msg.into())
}

fn ring_from(v: &Value) -> Result<Vec<GeoPoint>, FormatError> {
    v.as_array()
        .ok_or_else(|| bad("ring is not an array"))?
        .iter()
        .map(|pos| {
            let a = pos.as_array().ok_or_else(|| bad("position is not an array"))?;
            match (a.first().and_then(Value::as_f64), a.get(1).and_then(Value::as_f64)) {
                (Some(x), Some(y)) => Ok(GeoPoint::checked(x, y)?),
                _ => Err(bad("position needs two numbers")),
            }
        })
        .collect()
}

pub(crate) fn polygon_from_coords(v: &Value) -> Result<GeoPolygon, FormatError> {
    let rings = v.as_array().ok_or_else(|| bad("polygon coordinates are not an array"))?;
    let mut rings = rings.iter().map(ring_from);
    let ext = rings.next().ok_or_else(|| bad("polygon has no rings"))??;
    let holes = rings.collect::<Result<Vec<_>, _>>()?;
    Ok(GeoPolygon::new(ext, holes)?)
}

/// Polygons of a geometry; `None` for non-areal geometries.
fn geometry_polygons(g: &Value) -> Result<Option<Vec<GeoPolygon>>, FormatError> {
    let coords = || g.get("coordinates").ok_or_else(|| bad("geometry without coordinates"));
    match g.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok(Some(vec![polygon_from_coords(coords()?)?])),
        Some("MultiPolygon") => coords()?
            .as_array()
            .ok_or_else(|| bad("multipolygon coordinates are not an array"))?
            .iter()
            .map(polygon_from_coords)
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Ok(None),
        None => Err(bad("geometry without type")),
    }
}

fn props_from(v: Option<&Value>, index: usize) -> PolygonProps {
    let get = |k: &str| v.and_then(|p| p.get(k));
    PolygonProps {
        object_id: get("object_id")
            .and_then(Value::as_u64)
            .map_or(index, |x| x as usize),
        source_tiles: get("source_tiles")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|s| s.as_str().map(String::from)).collect())
            .unwrap_or_default(),
        gap_area: get("gap_area").and_then(Value::as_f64).unwrap_or(0.0),
    }
}

/// Polygons of a FeatureCollection, a single Feature or a bare geometry.
/// Non-areal features are skipped.
pub fn parse_geojson(text: &str) -> Result<Vec<(GeoPolygon, PolygonProps)>, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    let take = |feature: &Value, out: &mut Vec<(GeoPolygon, PolygonProps)>| -> Result<(), FormatError> {
        let geom = feature.get("geometry").ok_or_else(|| bad("feature without geometry"))?;
        if geom.is_null() {
            return Ok(());
        }
        if let Some(polys) = geometry_polygons(geom)? {
            for p in polys {
                let props = props_from(feature.get("properties"), out.len());
                out.push((p, props));
            }
        }
        Ok(())
    };
    match v.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => {
            let feats = v
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("FeatureCollection without features"))?;
            for f in feats {
                take(f, &mut out)?;
            }
        }
        Some("Feature") => take(&v, &mut out)?,
        Some(_) => {
            for p in geometry_polygons(&v)?.ok_or_else(|| {
                FormatError::Unsupported("expected Polygon or MultiPolygon".into())
            })? {
                let props = props_from(None, out.len());
                out.push((p, props));
            }
        }
        None => return Err(bad("missing \"type\"")),
    }
    Ok(out)
}

/// The first polygon of a GeoJSON document, for use as a query region.
pub fn parse_query(text: &str) -> Result<GeoPolygon, FormatError> {
    parse_geojson(text)?
        .into_iter()
        .next()
        .map(|(p, _)| p)
        .ok_or_else(|| FormatError::Unsupported("query file contains no polygon".into()))
}
