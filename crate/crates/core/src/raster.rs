//! PNG output and a tiny RGB canvas for line plots.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("{0}")]
    Layout(String),
}

/// Writes 8-bit interleaved pixels (`channels` 1 = gray, 3 = RGB).
pub fn write_png(path: &Path, width: usize, height: usize, channels: usize, pixels: &[u8]) -> Result<(), RasterError> {
    let color = match channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        _ => return Err(RasterError::Layout(format!("unsupported channel count {channels}"))),
    };
    if pixels.len() != width * height * channels || width == 0 || height == 0 {
        return Err(RasterError::Layout(format!(
            "{} bytes for a {width}x{height}x{channels} image",
            pixels.len()
        )));
    }
    let file = File::create(path).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(pixels)?;
    writer.finish()?;
    Ok(())
}

pub type Rgb = [u8; 3];

/// RGB canvas with the origin at the top-left corner.
#[derive(Debug, Clone)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: usize, height: usize, background: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: background.repeat(width * height),
        }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = (y as usize * self.width + x as usize) * 3;
            self.pixels[i..i + 3].copy_from_slice(&c);
        }
    }

    /// Blends `c` over the pixel with opacity `alpha`.
    pub fn blend(&mut self, x: i64, y: i64, c: Rgb, alpha: f64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            let i = (y as usize * self.width + x as usize) * 3;
            for k in 0..3 {
                let v = self.pixels[i + k] as f64 * (1.0 - alpha) + c[k] as f64 * alpha;
                self.pixels[i + k] = v.round() as u8;
            }
        }
    }

    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                self.set(x, y, c);
            }
        }
    }

    /// Bresenham line, `thickness` pixels wide.
    pub fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb, thickness: i64) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        let r = thickness / 2;
        loop {
            self.fill_rect(x - r, y - r, x - r + thickness - 1, y - r + thickness - 1, c);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Shades the area between two polylines sampled at the same x positions.
    pub fn band(&mut self, xs: &[f64], lower: &[f64], upper: &[f64], c: Rgb, alpha: f64) {
        for w in 0..xs.len().saturating_sub(1) {
            let (xa, xb) = (xs[w].round() as i64, xs[w + 1].round() as i64);
            for x in xa.min(xb)..=xa.max(xb) {
                let t = if xb == xa {
                    0.0
                } else {
                    (x - xa) as f64 / (xb - xa) as f64
                };
                let lo = lower[w] + t * (lower[w + 1] - lower[w]);
                let hi = upper[w] + t * (upper[w + 1] - upper[w]);
                let (top, bottom) = (lo.min(hi).round() as i64, lo.max(hi).round() as i64);
                for y in top..=bottom {
                    self.blend(x, y, c, alpha);
                }
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        write_png(path, self.width, self.height, 3, &self.pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_endpoints_and_band() {
        let mut c = Canvas::new(10, 10, [255; 3]);
        c.line((0, 0), (9, 9), [0; 3], 1);
        assert_eq!(c.get(0, 0), [0; 3]);
        assert_eq!(c.get(9, 9), [0; 3]);
        assert_eq!(c.get(9, 0), [255; 3]);
        c.band(&[0.0, 9.0], &[5.0, 5.0], &[5.0, 5.0], [0, 0, 255], 1.0);
        assert_eq!(c.get(3, 5), [0, 0, 255]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        write_png(&p, 3, 2, 1, &[0, 50, 100, 150, 200, 250]).unwrap();
        let dec = png::Decoder::new(std::io::BufReader::new(File::open(&p).unwrap()));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (3, 2));
        assert_eq!(&buf[..6], &[0, 50, 100, 150, 200, 250]);
        assert!(write_png(&p, 3, 3, 1, &[0; 6]).is_err());
    }
}
