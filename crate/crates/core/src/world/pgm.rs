//! ASCII greyscale dumps (`P2`) of image vectors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::persist;

/// `(width, height)`: square when `n` is a perfect square, otherwise `n x 1`.
pub fn image_shape(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        (side, side)
    } else {
        (n, 1)
    }
}

pub fn quantize(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes row-major pixels in `[0, 1]` as a `P2` document, one image row per line.
pub fn encode(pixels: &[f64], width: usize, height: usize) -> Result<String> {
    if width * height != pixels.len() || width == 0 {
        return Err(Error::invalid(format!(
            "{} pixels do not fill a {width}x{height} image",
            pixels.len()
        )));
    }
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks_exact(width) {
        let line: Vec<String> = row.iter().map(|&p| quantize(p).to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    Ok(out)
}

/// Tiles equally sized images into a grid, `cells[row][col]`.
pub fn tile(cells: &[Vec<&[f64]>], n: usize) -> Result<(Vec<f64>, usize, usize)> {
    let (w, h) = image_shape(n);
    let rows = cells.len();
    let cols = cells.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || cells.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("image grid must be a non-empty rectangle"));
    }
    if cells.iter().flatten().any(|img| img.len() != n) {
        return Err(Error::invalid("all grid images must have the same size"));
    }
    let (width, height) = (cols * w, rows * h);
    let mut pixels = Vec::with_capacity(width * height);
    for row in cells {
        for y in 0..h {
            for img in row {
                pixels.extend_from_slice(&img[y * w..(y + 1) * w]);
            }
        }
    }
    Ok((pixels, width, height))
}

pub fn write(path: &Path, pixels: &[f64], width: usize, height: usize) -> Result<()> {
    persist::write_text(path, &encode(pixels, width, height)?)
}

/// Writes one image using [`image_shape`].
pub fn write_image(path: &Path, pixels: &[f64]) -> Result<()> {
    let (w, h) = image_shape(pixels.len());
    write(path, pixels, w, h)
}

/// Parses a `P2` document into `(width, height, values)`.
pub fn parse(text: &str) -> Result<(usize, usize, Vec<u8>)> {
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::invalid("not a P2 document"));
    }
    let mut num = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::invalid("truncated or malformed P2 document"))
    };
    let (w, h, max) = (num()?, num()?, num()?);
    if max != 255 {
        return Err(Error::invalid("only maxval 255 is supported"));
    }
    let values = (0..w * h)
        .map(|_| num().map(|v| v.min(255) as u8))
        .collect::<Result<Vec<_>>>()?;
    Ok((w, h, values))
}
