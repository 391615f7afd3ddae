//! On-disk tile layout: `<id>.pgm` (binary P5), `<id>.json` metadata and an
//! optional `<id>.mask.json` stamp mask, all in one directory.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geo::{GeoError, RasterTile, TileMeta};
use crate::vectorizer::StampMask;

#[derive(Debug, Error)]
pub enum TileFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed PGM: {reason}")]
    Pgm { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Json { path: PathBuf, reason: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TileFileError + '_ {
    move |source| TileFileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn raster_path(root: &Path, id: &str) -> PathBuf {
    root.join(format!("{id}.pgm"))
}

pub fn meta_path(root: &Path, id: &str) -> PathBuf {
    root.join(format!("{id}.json"))
}

pub fn mask_path(root: &Path, id: &str) -> PathBuf {
    root.join(format!("{id}.mask.json"))
}

/// Encodes a binary (P5) PGM with maxval 255.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Decodes a binary (P5) PGM with maxval ≤ 255. Returns `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let mut pos = 0usize;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(format!("expected P5 magic, found {magic:?}"));
    }
    let num = |s: String| s.parse::<usize>().map_err(|e| format!("bad header field {s:?}: {e}"));
    let w = num(token()?)?;
    let h = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = w * h;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < need {
        return Err(format!("expected {need} pixel bytes, found {}", data.len()));
    }
    Ok((w, h, data[..need].to_vec()))
}

pub fn read_meta(path: &Path) -> Result<TileMeta, TileFileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(TileMeta::from_json(&text)?)
}

pub fn read_mask(path: &Path) -> Result<StampMask, TileFileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| TileFileError::Json {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Mask sidecar if present, else an empty mask.
pub fn read_mask_or_empty(root: &Path, id: &str) -> Result<StampMask, TileFileError> {
    let path = mask_path(root, id);
    if path.exists() {
        read_mask(&path)
    } else {
        Ok(StampMask::default())
    }
}

/// Reads `<root>/<id>.pgm` and checks it against `meta`.
pub fn read_raster(root: &Path, meta: &TileMeta) -> Result<RasterTile, TileFileError> {
    let path = raster_path(root, &meta.id);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let (w, h, pixels) = decode_pgm(&bytes).map_err(|reason| TileFileError::Pgm {
        path: path.clone(),
        reason,
    })?;
    if w != meta.width_px as usize || h != meta.height_px as usize {
        return Err(GeoError::DimensionMismatch {
            id: meta.id.clone(),
            got_w: w,
            got_h: h,
            want_w: meta.width_px as usize,
            want_h: meta.height_px as usize,
        }
        .into());
    }
    Ok(RasterTile::new(meta.clone(), pixels)?)
}

/// Writes raster, metadata and mask sidecars for one tile.
pub fn write_tile(root: &Path, tile: &RasterTile, mask: &StampMask) -> Result<(), TileFileError> {
    let id = &tile.meta.id;
    let p = raster_path(root, id);
    fs::write(&p, encode_pgm(tile.width(), tile.height(), tile.pixels())).map_err(io_err(&p))?;
    let p = meta_path(root, id);
    fs::write(&p, tile.meta.to_json() + "\n").map_err(io_err(&p))?;
    let p = mask_path(root, id);
    let text = serde_json::to_string(mask).expect("mask serializes");
    fs::write(&p, text + "\n").map_err(io_err(&p))?;
    Ok(())
}
