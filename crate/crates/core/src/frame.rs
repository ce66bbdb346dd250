//! Immutable raster snapshots of a game screen.

use std::fmt;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame dimensions must be non-zero (got {width}x{height})")]
    ZeroSized { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image encode failed: {0}")]
    Encode(String),
}

/// Width and height of an input surface in pixels. Pointer coordinates are
/// valid on the closed range `0..=width` by `0..=height`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceBounds {
    pub width: u32,
    pub height: u32,
}

impl SurfaceBounds {
    /// The desktop surface used by DOS-style games.
    pub const DESKTOP: SurfaceBounds = SurfaceBounds {
        width: 640,
        height: 400,
    };
    /// Native handheld console raster.
    pub const CONSOLE: SurfaceBounds = SurfaceBounds {
        width: 160,
        height: 144,
    };

    pub const fn new(width: u32, height: u32) -> Self {
        SurfaceBounds { width, height }
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x <= self.width as i64 && y <= self.height as i64
    }
}

impl Default for SurfaceBounds {
    fn default() -> Self {
        SurfaceBounds::DESKTOP
    }
}

impl fmt::Display for SurfaceBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// An RGB frame. Pixel storage is shared, so cloning is cheap and a frame
/// handed to another thread can never be mutated underneath it.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Arc<[u8]>,
    captured_at_ms: u64,
}

impl Frame {
    pub fn new(
        width: u32,
        height: u32,
        pixels: Vec<u8>,
        captured_at_ms: u64,
    ) -> Result<Frame, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroSized { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(FrameError::BufferLength {
                width,
                height,
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            pixels: pixels.into(),
            captured_at_ms,
        })
    }

    /// A frame of one solid color.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Frame {
        Frame::from_fn(width, height, |_, _| rgb)
    }

    /// Builds a frame by evaluating `f(x, y)` for every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Frame {
        assert!(width > 0 && height > 0, "frame dimensions must be non-zero");
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Frame {
            width,
            height,
            pixels: pixels.into(),
            captured_at_ms: 0,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bounds(&self) -> SurfaceBounds {
        SurfaceBounds::new(self.width, self.height)
    }

    /// Row-major RGB triples.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn captured_at_ms(&self) -> u64 {
        self.captured_at_ms
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Same pixels, different capture time. Shares the pixel buffer.
    pub fn with_timestamp(&self, captured_at_ms: u64) -> Frame {
        Frame {
            captured_at_ms,
            ..self.clone()
        }
    }

    pub fn same_pixels(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }

    /// 2x box downscale, used to shrink history frames sent to a model.
    /// Frames with an odd dimension drop the last row/column.
    pub fn downscale_2x(&self) -> Frame {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        if self.width < 2 || self.height < 2 {
            return self.clone();
        }
        let mut frame = Frame::from_fn(w, h, |x, y| {
            let mut acc = [0u32; 3];
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let p = self.pixel(2 * x + dx, 2 * y + dy);
                for c in 0..3 {
                    acc[c] += p[c] as u32;
                }
            }
            [
                ((acc[0] + 2) / 4) as u8,
                ((acc[1] + 2) / 4) as u8,
                ((acc[2] + 2) / 4) as u8,
            ]
        });
        frame.captured_at_ms = self.captured_at_ms;
        frame
    }

    pub fn to_png(&self) -> Result<Vec<u8>, FrameError> {
        let img = image::RgbImage::from_raw(self.width, self.height, self.pixels.to_vec())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| FrameError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8], captured_at_ms: u64) -> Result<Frame, FrameError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| FrameError::Decode(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Frame::new(w, h, img.into_raw(), captured_at_ms)
    }

    /// Loads any image format the `image` crate was built with (PNG here),
    /// plus binary/ASCII PPM which the test patterns use.
    pub fn open(path: &Path) -> Result<Frame, FrameError> {
        let bytes = std::fs::read(path).map_err(|e| FrameError::Decode(e.to_string()))?;
        if bytes.starts_with(b"P3") || bytes.starts_with(b"P6") {
            return Frame::from_ppm(&bytes);
        }
        let img = image::load_from_memory(&bytes)
            .map_err(|e| FrameError::Decode(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Frame::new(w, h, img.into_raw(), 0)
    }

    /// Parses a PPM image (`P3` ASCII or `P6` binary, maxval 255).
    pub fn from_ppm(bytes: &[u8]) -> Result<Frame, FrameError> {
        let bad = |msg: &str| FrameError::Decode(format!("ppm: {msg}"));
        let mut pos = 0;
        let mut header = Vec::with_capacity(4);
        while header.len() < 4 {
            // skip whitespace and comments
            while pos < bytes.len() {
                if bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                } else if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        let magic = header[0].as_str();
        let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
        let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval != 255 {
            return Err(bad("only maxval 255 is supported"));
        }
        let n = w as usize * h as usize * 3;
        let pixels = match magic {
            "P6" => {
                let data = bytes.get(pos + 1..pos + 1 + n).ok_or_else(|| bad("truncated data"))?;
                data.to_vec()
            }
            "P3" => {
                let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| bad("not ascii"))?;
                let values = text
                    .lines()
                    .map(|l| l.split('#').next().unwrap_or(""))
                    .flat_map(str::split_whitespace)
                    .map(|v| v.parse::<u8>().map_err(|_| bad("bad sample")))
                    .collect::<Result<Vec<u8>, _>>()?;
                if values.len() != n {
                    return Err(bad("wrong sample count"));
                }
                values
            }
            _ => return Err(bad("unsupported magic")),
        };
        Frame::new(w, h, pixels, 0)
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("captured_at_ms", &self.captured_at_ms)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(matches!(
            Frame::new(0, 4, vec![], 0),
            Err(FrameError::ZeroSized { .. })
        ));
        assert!(matches!(
            Frame::new(2, 2, vec![0; 11], 0),
            Err(FrameError::BufferLength { expected: 12, .. })
        ));
        assert!(Frame::new(2, 2, vec![0; 12], 0).is_ok());
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let frame = Frame::from_fn(13, 7, |x, y| [(x * 19) as u8, (y * 31) as u8, (x ^ y) as u8])
            .with_timestamp(42);
        let png = frame.to_png().unwrap();
        let back = Frame::from_png(&png, 42).unwrap();
        assert_eq!(frame, back);
    }

    #[test]
    fn ppm_ascii_parses() {
        let text = b"P3\n# comment\n2 1\n255\n255 0 0  0 0 255\n";
        let f = Frame::from_ppm(text).unwrap();
        assert_eq!(f.pixel(0, 0), [255, 0, 0]);
        assert_eq!(f.pixel(1, 0), [0, 0, 255]);
    }

    #[test]
    fn bounds_are_inclusive() {
        let b = SurfaceBounds::DESKTOP;
        assert!(b.contains(0, 0));
        assert!(b.contains(640, 400));
        assert!(!b.contains(641, 0));
        assert!(!b.contains(-1, 3));
    }
}
