use crate::geo::{GeoPoint, GeoPolygon};

use super::geojson::fmt_coord;
use super::FormatError;

fn ring_text(ring: &[GeoPoint]) -> String {
    let pts: Vec<String> = ring
        .iter()
        .map(|p| format!("{} {}", fmt_coord(p.lon), fmt_coord(p.lat)))
        .collect();
    format!("({})", pts.join(", "))
}

/// One `POLYGON ((...), (...))` line per polygon.
pub fn emit_wkt(polys: &[GeoPolygon]) -> String {
    let mut out = String::new();
    for p in polys {
        let rings: Vec<String> = p.rings().map(ring_text).collect();
        out.push_str("POLYGON (");
        out.push_str(&rings.join(", "));
        out.push_str(")\n");
    }
    out
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, what: &str) -> FormatError {
        FormatError::Wkt(format!("{what} at byte {}", self.pos))
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), FormatError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn word(&mut self) -> String {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).to_ascii_uppercase()
    }

    fn number(&mut self) -> Result<f64, FormatError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && matches!(self.s[self.pos], b'0'..=b'9' | b'-' | b'+' | b'.' | b'e' | b'E')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected a number"))
    }

    fn ring(&mut self) -> Result<Vec<GeoPoint>, FormatError> {
        self.expect(b'(')?;
        let mut pts = Vec::new();
        loop {
            let x = self.number()?;
            let y = self.number()?;
            pts.push(GeoPoint::checked(x, y)?);
            if !self.eat(b',') {
                break;
            }
        }
        self.expect(b')')?;
        Ok(pts)
    }

    fn polygon(&mut self) -> Result<GeoPolygon, FormatError> {
        self.expect(b'(')?;
        let mut rings = vec![self.ring()?];
        while self.eat(b',') {
            rings.push(self.ring()?);
        }
        self.expect(b')')?;
        let ext = rings.remove(0);
        Ok(GeoPolygon::new(ext, rings)?)
    }
}

/// Parses `POLYGON` and `MULTIPOLYGON` lines; blank lines are ignored.
pub fn parse_wkt(text: &str) -> Result<Vec<GeoPolygon>, FormatError> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut p = Parser {
            s: line.as_bytes(),
            pos: 0,
        };
        match p.word().as_str() {
            "POLYGON" => out.push(p.polygon()?),
            "MULTIPOLYGON" => {
                p.expect(b'(')?;
                out.push(p.polygon()?);
                while p.eat(b',') {
                    out.push(p.polygon()?);
                }
                p.expect(b')')?;
            }
            other => return Err(FormatError::Unsupported(format!("WKT type `{other}`"))),
        }
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing characters"));
        }
    }
    Ok(out)
}
