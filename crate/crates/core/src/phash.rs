//! 64-bit perceptual hashes of frames.
//!
//! Both hashes reduce the frame to luminance, box-filter it down to a tiny
//! grid, and threshold each cell. The box filter is computed exactly: cell
//! boundaries that fall inside a pixel give that pixel a fractional weight,
//! and all weights are kept as integers over a common denominator. Every
//! comparison is therefore an integer comparison and the resulting bits do
//! not depend on floating-point behavior.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::frame::Frame;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("frame {width}x{height} is smaller than the {min_width}x{min_height} hash grid")]
    FrameTooSmall {
        width: u32,
        height: u32,
        min_width: u32,
        min_height: u32,
    },
    #[error("cannot compare a {0} hash with a {1} hash")]
    AlgorithmMismatch(HashAlgorithm, HashAlgorithm),
    #[error("malformed hash string {0:?}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum HashAlgorithm {
    Average,
    #[default]
    Difference,
}

impl HashAlgorithm {
    pub fn tag(self) -> &'static str {
        match self {
            HashAlgorithm::Average => "ahash",
            HashAlgorithm::Difference => "dhash",
        }
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for HashAlgorithm {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ahash" => Ok(HashAlgorithm::Average),
            "dhash" => Ok(HashAlgorithm::Difference),
            other => Err(HashError::Malformed(other.to_string())),
        }
    }
}

impl Serialize for HashAlgorithm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for HashAlgorithm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A 64-bit hash tagged with the algorithm that produced it. Bit 63 (the
/// most significant) corresponds to grid cell 0, in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PerceptualHash {
    bits: u64,
    algorithm: HashAlgorithm,
}

impl PerceptualHash {
    pub const fn new(bits: u64, algorithm: HashAlgorithm) -> Self {
        PerceptualHash { bits, algorithm }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn distance(&self, other: &PerceptualHash) -> Result<u32, HashError> {
        hamming_distance(*self, *other)
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:016x}", self.algorithm, self.bits)
    }
}

impl FromStr for PerceptualHash {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || HashError::Malformed(s.to_string());
        let (tag, hex) = s.split_once(':').ok_or_else(malformed)?;
        let algorithm = tag.parse().map_err(|_| malformed())?;
        if hex.len() != 16 || !hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(malformed());
        }
        let bits = u64::from_str_radix(hex, 16).map_err(|_| malformed())?;
        Ok(PerceptualHash { bits, algorithm })
    }
}

impl Serialize for PerceptualHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PerceptualHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-pixel luminance of a frame, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LumaGrid {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u8>,
}

impl LumaGrid {
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// `round(0.299 R + 0.587 G + 0.114 B)`, computed in integers with halves
/// rounded up.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let weighted = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((weighted + 500) / 1000) as u8
}

pub fn to_grayscale(frame: &Frame) -> LumaGrid {
    let values = frame
        .pixels()
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]))
        .collect();
    LumaGrid {
        width: frame.width(),
        height: frame.height(),
        values,
    }
}

/// Overlap weights of source pixels with each of `cells` equal-width cells
/// along one axis of length `len`. Cell `c` covers `[c*len, (c+1)*len)` and
/// pixel `p` covers `[p*cells, (p+1)*cells)`, both in units of `1/cells`
/// pixel, so every overlap is an integer and each cell's weights sum to `len`.
fn axis_weights(len: u32, cells: u32) -> Vec<Vec<(usize, u64)>> {
    let (len, n) = (len as u64, cells as u64);
    (0..n)
        .map(|c| {
            let (lo, hi) = (c * len, (c + 1) * len);
            let first = lo / n;
            let last = (hi - 1) / n;
            (first..=last)
                .filter_map(|p| {
                    let overlap = hi.min((p + 1) * n).saturating_sub(lo.max(p * n));
                    (overlap > 0).then_some((p as usize, overlap))
                })
                .collect()
        })
        .collect()
}

/// Box-filtered cell sums. Each entry equals `W * H` times the true
/// cell mean, where `W`, `H` are the grid's source dimensions.
fn cell_sums(luma: &LumaGrid, cols: u32, rows: u32) -> Vec<u64> {
    let xw = axis_weights(luma.width, cols);
    let yw = axis_weights(luma.height, rows);
    // horizontal pass: per source row, the weighted sum inside each column cell
    let row_sums: Vec<Vec<u64>> = (0..luma.height)
        .map(|y| {
            let row = &luma.values[y as usize * luma.width as usize..][..luma.width as usize];
            xw.iter()
                .map(|ws| ws.iter().map(|&(x, w)| row[x] as u64 * w).sum())
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity((cols * rows) as usize);
    for ws in &yw {
        for c in 0..cols as usize {
            out.push(ws.iter().map(|&(y, w)| row_sums[y][c] * w).sum());
        }
    }
    out
}

fn check_size(frame: &Frame, min_width: u32, min_height: u32) -> Result<(), HashError> {
    if frame.width() < min_width || frame.height() < min_height {
        return Err(HashError::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
            min_width,
            min_height,
        });
    }
    Ok(())
}

fn pack_bits(bits: impl Iterator<Item = bool>) -> u64 {
    bits.fold(0u64, |acc, b| (acc << 1) | b as u64)
}

/// 8x8 box average; a bit is set when its cell is strictly brighter than the
/// mean of all 64 cells.
pub fn average_hash(frame: &Frame) -> Result<PerceptualHash, HashError> {
    check_size(frame, 8, 8)?;
    let sums = cell_sums(&to_grayscale(frame), 8, 8);
    let total: u64 = sums.iter().sum();
    // cell > total / 64  <=>  64 * cell > total
    let bits = pack_bits(sums.iter().map(|&s| 64 * s > total));
    Ok(PerceptualHash::new(bits, HashAlgorithm::Average))
}

/// 9x8 box average; bit `(r, c)` is set when cell `(r, c + 1)` is strictly
/// brighter than cell `(r, c)`.
pub fn difference_hash(frame: &Frame) -> Result<PerceptualHash, HashError> {
    check_size(frame, 9, 8)?;
    let sums = cell_sums(&to_grayscale(frame), 9, 8);
    let bits = pack_bits((0..8).flat_map(|r| {
        let row = &sums[r * 9..r * 9 + 9];
        (0..8).map(move |c| row[c + 1] > row[c])
    }));
    Ok(PerceptualHash::new(bits, HashAlgorithm::Difference))
}

pub fn hash_frame(frame: &Frame, algorithm: HashAlgorithm) -> Result<PerceptualHash, HashError> {
    match algorithm {
        HashAlgorithm::Average => average_hash(frame),
        HashAlgorithm::Difference => difference_hash(frame),
    }
}

pub fn hamming_distance(a: PerceptualHash, b: PerceptualHash) -> Result<u32, HashError> {
    if a.algorithm != b.algorithm {
        return Err(HashError::AlgorithmMismatch(a.algorithm, b.algorithm));
    }
    Ok((a.bits ^ b.bits).count_ones())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_primaries() {
        assert!(to_grayscale(&Frame::filled(4, 4, [255, 255, 255]))
            .values
            .iter()
            .all(|&v| v == 255));
        assert!(to_grayscale(&Frame::filled(4, 4, [0, 0, 0]))
            .values
            .iter()
            .all(|&v| v == 0));
        // 0.299 * 255 = 76.245
        assert!(to_grayscale(&Frame::filled(4, 4, [255, 0, 0]))
            .values
            .iter()
            .all(|&v| v == 76));
    }

    #[test]
    fn constant_frames_hash_to_zero() {
        let f = Frame::filled(32, 24, [128, 128, 128]);
        assert_eq!(average_hash(&f).unwrap().bits(), 0);
        assert_eq!(difference_hash(&f).unwrap().bits(), 0);
    }

    #[test]
    fn half_split_average_hash() {
        let f = Frame::from_fn(16, 16, |x, _| if x < 8 { [0; 3] } else { [255; 3] });
        assert_eq!(average_hash(&f).unwrap().bits(), 0x0F0F_0F0F_0F0F_0F0F);
    }

    #[test]
    fn increasing_gradient_difference_hash() {
        let f = Frame::from_fn(90, 8, |x, _| [(x * 2) as u8; 3]);
        assert_eq!(difference_hash(&f).unwrap().bits(), u64::MAX);
    }

    #[test]
    fn too_small() {
        let f = Frame::filled(8, 7, [0; 3]);
        assert!(matches!(
            average_hash(&f),
            Err(HashError::FrameTooSmall { .. })
        ));
        let f = Frame::filled(8, 8, [0; 3]);
        assert!(average_hash(&f).is_ok());
        assert!(matches!(
            difference_hash(&f),
            Err(HashError::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn distances() {
        let h = PerceptualHash::new(0b1010, HashAlgorithm::Difference);
        assert_eq!(hamming_distance(h, h), Ok(0));
        let g = PerceptualHash::new(0b0110, HashAlgorithm::Difference);
        assert_eq!(hamming_distance(h, g), Ok(2));
        let zero = PerceptualHash::new(0, HashAlgorithm::Average);
        let ones = PerceptualHash::new(u64::MAX, HashAlgorithm::Average);
        assert_eq!(hamming_distance(zero, ones), Ok(64));
        assert_eq!(
            hamming_distance(h, zero),
            Err(HashError::AlgorithmMismatch(
                HashAlgorithm::Difference,
                HashAlgorithm::Average
            ))
        );
    }

    #[test]
    fn axis_weights_partition_each_cell() {
        for len in [9, 10, 16, 23, 144, 160, 400, 640] {
            for cells in [8, 9] {
                let ws = axis_weights(len, cells);
                for cell in &ws {
                    assert_eq!(cell.iter().map(|&(_, w)| w).sum::<u64>(), len as u64);
                }
                // every pixel contributes exactly `cells` units in total
                let mut per_pixel = vec![0u64; len as usize];
                for cell in &ws {
                    for &(p, w) in cell {
                        per_pixel[p] += w;
                    }
                }
                assert!(per_pixel.iter().all(|&w| w == cells as u64));
            }
        }
    }

    #[test]
    fn text_form() {
        let h = PerceptualHash::new(0xf0e1d2c3b4a59687, HashAlgorithm::Difference);
        assert_eq!(h.to_string(), "dhash:f0e1d2c3b4a59687");
        assert_eq!("dhash:f0e1d2c3b4a59687".parse::<PerceptualHash>(), Ok(h));
        assert!("dhash:F0E1D2C3B4A59687".parse::<PerceptualHash>().is_err());
        assert!("phash:0000000000000000".parse::<PerceptualHash>().is_err());
        assert!("dhash:123".parse::<PerceptualHash>().is_err());
    }
}
