//! Tiny software rasterizer for the practice games.

use crate::frame::Frame;

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const BLACK: [u8; 3] = [0, 0, 0];
pub const GREEN: [u8; 3] = [0, 200, 0];
pub const RED: [u8; 3] = [220, 0, 0];
pub const LIGHT_GRAY: [u8; 3] = [200, 200, 200];
pub const DARK_GRAY: [u8; 3] = [70, 70, 70];

pub struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: [u8; 3]) -> Self {
        Canvas {
            width,
            height,
            pixels: background.repeat((width * height) as usize),
        }
    }

    pub fn set(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, rgb: [u8; 3]) {
        let (x0, x1) = (x.max(0), (x + w).min(self.width as i64));
        let (y0, y1) = (y.max(0), (y + h).min(self.height as i64));
        if x0 >= x1 || y0 >= y1 {
            return;
        }
        let span = rgb.repeat((x1 - x0) as usize);
        for yy in y0..y1 {
            let start = ((yy * self.width as i64 + x0) * 3) as usize;
            self.pixels[start..start + span.len()].copy_from_slice(&span);
        }
    }

    pub fn fill_disc(&mut self, cx: i64, cy: i64, r: i64, rgb: [u8; 3]) {
        for y in cy - r..=cy + r {
            for x in cx - r..=cx + r {
                let (dx, dy) = (x - cx, y - cy);
                if dx * dx + dy * dy <= r * r {
                    self.set(x, y, rgb);
                }
            }
        }
    }

    /// Thick segment: every pixel within `half_width` of the segment.
    pub fn stroke(&mut self, a: (i64, i64), b: (i64, i64), half_width: i64, rgb: [u8; 3]) {
        let (x0, x1) = (a.0.min(b.0) - half_width, a.0.max(b.0) + half_width);
        let (y0, y1) = (a.1.min(b.1) - half_width, a.1.max(b.1) + half_width);
        let limit = (half_width * half_width) as f64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if dist2_to_segment((x as f64, y as f64), a, b) <= limit {
                    self.set(x, y, rgb);
                }
            }
        }
    }

    pub fn into_frame(self, captured_at_ms: u64) -> Frame {
        Frame::new(self.width, self.height, self.pixels, captured_at_ms)
            .expect("canvas buffer matches its dimensions")
    }
}

/// Squared distance from `p` to the segment `a`-`b`.
pub fn dist2_to_segment(p: (f64, f64), a: (i64, i64), b: (i64, i64)) -> f64 {
    let (ax, ay) = (a.0 as f64, a.1 as f64);
    let (bx, by) = (b.0 as f64, b.1 as f64);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - ax) * dx + (p.1 - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (ax + t * dx, ay + t * dy);
    (p.0 - qx).powi(2) + (p.1 - qy).powi(2)
}

/// Screen shown once a practice game is finished: a left-to-right ramp,
/// whose difference hash is all ones and far from every play screen.
pub fn completion_screen(width: u32, height: u32, captured_at_ms: u64) -> Frame {
    let f = Frame::from_fn(width, height, |x, _| {
        let v = (x as u64 * 255 / (width.max(2) - 1) as u64) as u8;
        [v, v, v]
    });
    f.with_timestamp(captured_at_ms)
}
