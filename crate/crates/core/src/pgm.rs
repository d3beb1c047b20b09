//! Portable graymap images as scalar fields on `[-1, 1]²`.

use std::io::Write;
use std::path::Path;

use crate::{Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, top row first.
    pub pixels: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.error(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse { offset: start, message: format!("{what} out of range") })
    }
}

impl PgmImage {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        let binary = match bytes.get(..2) {
            Some(b"P5") => true,
            Some(b"P2") => false,
            _ => return Err(c.error("missing P2/P5 magic number")),
        };
        c.pos = 2;
        let width = c.number("width")? as usize;
        let height = c.number("height")? as usize;
        c.skip_space();
        let maxval_at = c.pos;
        let maxval = c.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::Parse { offset: maxval_at, message: "image has no pixels".into() });
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Parse { offset: maxval_at, message: format!("maxval {maxval} outside 1..=65535") });
        }
        let count = width * height;
        let mut pixels = Vec::with_capacity(count);
        if binary {
            if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
                return Err(c.error("expected a single whitespace byte before the raster"));
            }
            c.pos += 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if bytes.len() - c.pos < need {
                return Err(Error::Parse { offset: bytes.len(), message: format!("raster truncated: {need} bytes expected") });
            }
            let raster = &bytes[c.pos..c.pos + need];
            if wide {
                pixels.extend(raster.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])));
            } else {
                pixels.extend(raster.iter().map(|&b| b as u16));
            }
            c.pos += need;
        } else {
            for _ in 0..count {
                c.skip_space();
                let at = c.pos;
                let v = c.number("pixel value")?;
                if v > maxval {
                    return Err(Error::Parse { offset: at, message: format!("pixel {v} exceeds maxval {maxval}") });
                }
                pixels.push(v as u16);
            }
        }
        if let Some(p) = pixels.iter().position(|&v| v as u32 > maxval) {
            return Err(Error::Parse { offset: c.pos, message: format!("pixel {p} exceeds maxval {maxval}") });
        }
        Ok(PgmImage { width, height, maxval: maxval as u16, pixels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        PgmImage::parse(&std::fs::read(path)?)
    }

    pub fn pixel(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col] as f64 / self.maxval as f64
    }

    /// Bilinear intensity in `[0, 1]`; `(-1, 1)` is the top-left pixel centre
    /// and `(1, -1)` the bottom-right one. Points outside are clamped.
    pub fn value(&self, p: &Point) -> f64 {
        let fx = ((p[0] + 1.0) * 0.5).clamp(0.0, 1.0) * (self.width - 1) as f64;
        let fy = ((1.0 - p[1]) * 0.5).clamp(0.0, 1.0) * (self.height - 1) as f64;
        let (c0, r0) = (fx.floor() as usize, fy.floor() as usize);
        let (c1, r1) = ((c0 + 1).min(self.width - 1), (r0 + 1).min(self.height - 1));
        let (tx, ty) = (fx - c0 as f64, fy - r0 as f64);
        let top = self.pixel(c0, r0) * (1.0 - tx) + self.pixel(c1, r0) * tx;
        let bottom = self.pixel(c0, r1) * (1.0 - tx) + self.pixel(c1, r1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Quantizes values in `[0, 1]` into a binary 8-bit image.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Self {
        let pixels = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u16).collect();
        PgmImage { width, height, maxval: 255, pixels }
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, self.maxval)?;
        if self.maxval > 255 {
            for p in &self.pixels {
                w.write_all(&p.to_be_bytes())?;
            }
        } else {
            w.write_all(&self.pixels.iter().map(|&p| p as u8).collect::<Vec<_>>())?;
        }
        Ok(())
    }
}

/// Loads a PGM file as a field oracle on `[-1, 1]²`.
pub fn load_pgm(path: &Path) -> Result<impl Fn(&Point) -> f64 + Sync + Send> {
    let img = PgmImage::load(path)?;
    Ok(move |p: &Point| img.value(p))
}
