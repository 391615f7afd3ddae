//! Vector encodings: fixed-precision GeoJSON and WKT for results, and a
//! lossless GeoJSON feature encoding for fragments passed between stages.

mod fragment;
mod geojson;
mod wkt;

use thiserror::Error;

use crate::geo::GeoError;

pub use fragment::{
    fragment_from_json, fragment_to_json, fragments_from_collection, fragments_to_collection,
    polygon_feature_from_json, polygon_feature_to_json,
};
pub use geojson::{emit_geojson, fmt_coord, parse_geojson, parse_query, PolygonProps};
pub use wkt::{emit_wkt, parse_wkt};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("malformed WKT: {0}")]
    Wkt(String),
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}
