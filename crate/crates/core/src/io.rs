//! File formats: 8-bit RGB images (PNG, binary PPM), depth maps (16-bit
//! binary PGM, grayscale PFM), and JSON artifacts.
//!
//! Depth files carry raw sensor-ish values; loading always min-max
//! normalizes to [0, 1] and optionally inverts afterwards, so "near = dark"
//! and "near = bright" conventions both map onto the relative scale the
//! imaging model expects. A constant depth file is rejected because it
//! normalizes to nothing.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{DepthMap, Image, CHANNELS};

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Loads an 8-bit RGB image from PNG or binary PPM, scaling to [0, 1].
pub fn load_image(path: &Path) -> Result<Image> {
    match extension(path).as_str() {
        "png" => load_png(path),
        "ppm" => load_ppm(path),
        other => Err(Error::UnsupportedFormat(format!(
            "unsupported image extension {other:?} for {}; expected png or ppm",
            path.display()
        ))),
    }
}

/// Saves an image as PNG or binary PPM, quantizing each sample to
/// round(v * 255).
pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    match extension(path).as_str() {
        "png" => {
            let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
                .expect("buffer length matches dimensions");
            buf.save_with_format(path, image::ImageFormat::Png)
                .map_err(|e| malformed(path, format!("PNG encode failed: {e}")))
        }
        "ppm" => {
            let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend_from_slice(&bytes);
            fs::write(path, out)?;
            Ok(())
        }
        other => Err(Error::UnsupportedFormat(format!(
            "unsupported image extension {other:?} for {}; expected png or ppm",
            path.display()
        ))),
    }
}

fn load_png(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| malformed(path, format!("PNG decode failed: {e}")))?;
    let rgb = match dynamic {
        image::DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{} must be 8-bit RGB, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(w, h, data)
}

/// Cursor over a PNM payload that understands its whitespace and `#`
/// comment rules.
struct PnmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PnmReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !matches!(self.bytes[self.pos], b' ' | b'\t' | b'\r' | b'\n')
        {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token().ok_or_else(|| format!("missing {what}"))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {what} {:?}", String::from_utf8_lossy(tok)))
    }

    /// Raster bytes after the single separator byte that ends the header.
    fn raster(&mut self, path: &Path) -> Result<&'a [u8]> {
        if self.pos >= self.bytes.len()
            || !matches!(self.bytes[self.pos], b' ' | b'\t' | b'\r' | b'\n')
        {
            return Err(malformed(path, "header not terminated by whitespace"));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

fn load_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let mut rd = PnmReader::new(&bytes);
    match rd.token() {
        Some(b"P6") => {}
        Some(b"P3") => {
            return Err(Error::UnsupportedFormat(format!(
                "{} is ASCII PPM; only binary P6 is supported",
                path.display()
            )))
        }
        _ => return Err(malformed(path, "not a PPM file")),
    }
    let w = rd.number("width").map_err(|r| malformed(path, r))?;
    let h = rd.number("height").map_err(|r| malformed(path, r))?;
    let maxval = rd.number("maxval").map_err(|r| malformed(path, r))?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "{} has maxval {maxval}; only 8-bit PPM is supported",
            path.display()
        )));
    }
    let raster = rd.raster(path)?;
    let need = w * h * CHANNELS;
    if raster.len() < need {
        return Err(malformed(
            path,
            format!("raster has {} bytes, expected {need}", raster.len()),
        ));
    }
    let data = raster[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(w, h, data)
}

/// Loads a depth map from 16-bit binary PGM or grayscale PFM, min-max
/// normalizes it, and flips the scale afterwards when `invert` is set.
pub fn load_depth(path: &Path, invert: bool) -> Result<DepthMap> {
    let (w, h, raw) = match extension(path).as_str() {
        "pgm" => load_pgm_raw(path)?,
        "pfm" => load_pfm_raw(path)?,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported depth extension {other:?} for {}; expected pgm or pfm",
                path.display()
            )))
        }
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &raw {
        if !v.is_finite() {
            return Err(malformed(path, "depth contains a non-finite value"));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        return Err(Error::InvalidInput(format!(
            "{} is a constant depth map and cannot be normalized",
            path.display()
        )));
    }
    let span = hi - lo;
    let values = raw
        .into_iter()
        .map(|v| {
            let n = (v - lo) / span;
            if invert {
                1.0 - n
            } else {
                n
            }
        })
        .collect();
    DepthMap::relative(w, h, values)
}

fn load_pgm_raw(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let mut rd = PnmReader::new(&bytes);
    match rd.token() {
        Some(b"P5") => {}
        Some(b"P2") => {
            return Err(Error::UnsupportedFormat(format!(
                "{} is ASCII PGM; only binary P5 is supported",
                path.display()
            )))
        }
        _ => return Err(malformed(path, "not a PGM file")),
    }
    let w = rd.number("width").map_err(|r| malformed(path, r))?;
    let h = rd.number("height").map_err(|r| malformed(path, r))?;
    let maxval = rd.number("maxval").map_err(|r| malformed(path, r))?;
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(path, format!("maxval {maxval} out of range")));
    }
    let raster = rd.raster(path)?;
    let n = w * h;
    let raw = if maxval > 255 {
        // Two bytes per sample, most significant first.
        if raster.len() < 2 * n {
            return Err(malformed(
                path,
                format!("raster has {} bytes, expected {}", raster.len(), 2 * n),
            ));
        }
        raster[..2 * n]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64)
            .collect()
    } else {
        if raster.len() < n {
            return Err(malformed(
                path,
                format!("raster has {} bytes, expected {n}", raster.len()),
            ));
        }
        raster[..n].iter().map(|&b| b as f64).collect()
    };
    Ok((w, h, raw))
}

fn load_pfm_raw(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let mut rd = PnmReader::new(&bytes);
    match rd.token() {
        Some(b"Pf") => {}
        Some(b"PF") => {
            return Err(Error::UnsupportedFormat(format!(
                "{} is a color PFM; only grayscale Pf is supported",
                path.display()
            )))
        }
        _ => return Err(malformed(path, "not a PFM file")),
    }
    let w = rd.number("width").map_err(|r| malformed(path, r))?;
    let h = rd.number("height").map_err(|r| malformed(path, r))?;
    let scale_tok = rd
        .token()
        .ok_or_else(|| malformed(path, "missing scale"))?;
    let scale: f64 = std::str::from_utf8(scale_tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(path, "invalid scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed(path, format!("scale {scale} out of range")));
    }
    let little_endian = scale < 0.0;
    let raster = rd.raster(path)?;
    let n = w * h;
    if raster.len() < 4 * n {
        return Err(malformed(
            path,
            format!("raster has {} bytes, expected {}", raster.len(), 4 * n),
        ));
    }
    // PFM stores rows bottom to top.
    let mut raw = vec![0.0; n];
    for (i, b) in raster[..4 * n].chunks_exact(4).enumerate() {
        let quad = [b[0], b[1], b[2], b[3]];
        let v = if little_endian {
            f32::from_le_bytes(quad)
        } else {
            f32::from_be_bytes(quad)
        } as f64;
        let (x, y_bottom) = (i % w, i / w);
        raw[(h - 1 - y_bottom) * w + x] = v;
    }
    Ok((w, h, raw))
}

/// Writes a value as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| malformed(path, format!("JSON parse failed: {e}")))
}
