//! Lossless feature encoding of fragments and stitched polygons. Floats go
//! through serde_json's shortest round-trip representation, so decoding an
//! encoded value gives back the same bits.

use serde_json::{json, Value};

use crate::geo::{GeoPoint, GeoPolygon};
use crate::vectorizer::{BoundaryFragment, Edge};

use super::geojson::polygon_from_coords;
use super::FormatError;

fn bad(msg: impl Into<String>) -> FormatError {
    FormatError::Json(msg.into())
}

fn coords(points: &[GeoPoint]) -> Value {
    Value::Array(points.iter().map(|p| json!([p.lon, p.lat])).collect())
}

fn points_from(v: &Value) -> Result<Vec<GeoPoint>, FormatError> {
    v.as_array()
        .ok_or_else(|| bad("coordinates are not an array"))?
        .iter()
        .map(|pos| match (pos.get(0).and_then(Value::as_f64), pos.get(1).and_then(Value::as_f64)) {
            (Some(x), Some(y)) => Ok(GeoPoint::new(x, y)),
            _ => Err(bad("position needs two numbers")),
        })
        .collect()
}

fn edge_value(e: Option<Edge>) -> Value {
    e.map_or(Value::Null, |e| Value::String(e.as_str().into()))
}

fn edge_from(v: Option<&Value>) -> Result<Option<Edge>, FormatError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Edge::parse(s)
            .map(Some)
            .ok_or_else(|| bad(format!("unknown edge tag `{s}`"))),
        Some(_) => Err(bad("edge tag must be a string")),
    }
}

fn fragment_value(f: &BoundaryFragment) -> Value {
    let geometry = if f.closed {
        json!({"type": "Polygon", "coordinates": [coords(&f.points)]})
    } else {
        json!({"type": "LineString", "coordinates": coords(&f.points)})
    };
    json!({
        "type": "Feature",
        "properties": {
            "source_tiles": f.source_tiles,
            "closed": f.closed,
            "start_edge": edge_value(f.start_edge),
            "end_edge": edge_value(f.end_edge),
        },
        "geometry": geometry,
    })
}

pub fn fragment_to_json(f: &BoundaryFragment) -> String {
    fragment_value(f).to_string()
}

fn fragment_from_value(v: &Value) -> Result<BoundaryFragment, FormatError> {
    let props = v.get("properties").ok_or_else(|| bad("fragment without properties"))?;
    let geom = v.get("geometry").ok_or_else(|| bad("fragment without geometry"))?;
    let source_tiles = props
        .get("source_tiles")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("fragment without source_tiles"))?
        .iter()
        .map(|s| s.as_str().map(String::from).ok_or_else(|| bad("tile id must be a string")))
        .collect::<Result<Vec<_>, _>>()?;
    let c = geom.get("coordinates").ok_or_else(|| bad("geometry without coordinates"))?;
    let (points, closed) = match geom.get("type").and_then(Value::as_str) {
        Some("LineString") => (points_from(c)?, false),
        Some("Polygon") => (
            points_from(c.get(0).ok_or_else(|| bad("polygon without rings"))?)?,
            true,
        ),
        other => return Err(FormatError::Unsupported(format!("fragment geometry {other:?}"))),
    };
    if points.len() < 2 {
        return Err(bad("fragment needs at least two points"));
    }
    Ok(BoundaryFragment {
        points,
        closed,
        source_tiles,
        start_edge: edge_from(props.get("start_edge"))?,
        end_edge: edge_from(props.get("end_edge"))?,
    })
}

pub fn fragment_from_json(text: &str) -> Result<BoundaryFragment, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    fragment_from_value(&v)
}

pub fn fragments_to_collection(frags: &[BoundaryFragment]) -> String {
    let feats: Vec<Value> = frags.iter().map(fragment_value).collect();
    json!({"type": "FeatureCollection", "features": feats}).to_string() + "\n"
}

pub fn fragments_from_collection(text: &str) -> Result<Vec<BoundaryFragment>, FormatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    v.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("expected a FeatureCollection"))?
        .iter()
        .map(fragment_from_value)
        .collect()
}

/// Full-precision polygon feature carrying its source tiles.
pub fn polygon_feature_to_json(poly: &GeoPolygon, source_tiles: &[String]) -> String {
    let rings: Vec<Value> = poly.rings().map(coords).collect();
    json!({
        "type": "Feature",
        "properties": {"source_tiles": source_tiles},
        "geometry": {"type": "Polygon", "coordinates": rings},
    })
    .to_string()
}

pub fn polygon_feature_from_json(text: &str) -> Result<(GeoPolygon, Vec<String>), FormatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let tiles = v
        .pointer("/properties/source_tiles")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|s| s.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let c = v
        .pointer("/geometry/coordinates")
        .ok_or_else(|| bad("polygon feature without coordinates"))?;
    Ok((polygon_from_coords(c)?, tiles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fragment_round_trip_is_exact() {
        let f = BoundaryFragment {
            points: vec![
                GeoPoint::new(0.1 + 0.2, 1.0 / 3.0),
                GeoPoint::new(-179.99999999999997, 89.5),
                GeoPoint::new(1e-300, -0.0),
            ],
            closed: false,
            source_tiles: vec!["a".into(), "b".into()],
            start_edge: Some(Edge::N),
            end_edge: Some(Edge::W),
        };
        let back = fragment_from_json(&fragment_to_json(&f)).unwrap();
        assert_eq!(back, f);
        let mut c = f.clone();
        c.closed = true;
        c.points.push(c.points[0]);
        c.start_edge = None;
        c.end_edge = None;
        let all = fragments_from_collection(&fragments_to_collection(&[f.clone(), c.clone()])).unwrap();
        assert_eq!(all, vec![f, c]);
    }

    #[test]
    fn polygon_feature_round_trip() {
        let p = GeoPolygon::new(
            vec![GeoPoint::new(0.1, 0.2), GeoPoint::new(1.0 / 3.0, 0.2), GeoPoint::new(0.3, 0.7)],
            vec![],
        )
        .unwrap();
        let tiles = vec!["x".to_string()];
        let (q, t) = polygon_feature_from_json(&polygon_feature_to_json(&p, &tiles)).unwrap();
        assert_eq!((q, t), (p, tiles));
    }
}
