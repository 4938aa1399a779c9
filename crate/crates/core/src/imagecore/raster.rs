//! Pixel grids: colour input, single-channel grey images and binary masks.

use crate::error::{Error, Result};

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// Single colour plane: 0 = R, 1 = G, 2 = B.
    pub fn channel(&self, index: usize) -> ChannelImage {
        let values = self.pixels.iter().map(|p| p[index]).collect();
        ChannelImage {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub fn green(&self) -> ChannelImage {
        self.channel(1)
    }

    /// Copy of the inclusive rectangle `(x1, y1)..=(x2, y2)`.
    pub fn crop(&self, roi: &Roi) -> RasterImage {
        let (w, h) = (roi.width(), roi.height());
        let mut pixels = Vec::with_capacity(w * h);
        for y in roi.y1..=roi.y2 {
            let row = y * self.width;
            pixels.extend_from_slice(&self.pixels[row + roi.x1..=row + roi.x2]);
        }
        RasterImage {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Row-major single-channel 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl ChannelImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.values[y * self.width + x] = v;
    }

    /// `255 - v` for every pixel.
    pub fn inverted(&self) -> ChannelImage {
        ChannelImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 255 - v).collect(),
        }
    }

    pub fn crop(&self, roi: &Roi) -> ChannelImage {
        let (w, h) = (roi.width(), roi.height());
        let mut values = Vec::with_capacity(w * h);
        for y in roi.y1..=roi.y2 {
            let row = y * self.width;
            values.extend_from_slice(&self.values[row + roi.x1..=row + roi.x2]);
        }
        ChannelImage {
            width: w,
            height: h,
            values,
        }
    }

    pub fn min_max(&self) -> (u8, u8) {
        let min = self.values.iter().copied().min().unwrap_or(0);
        let max = self.values.iter().copied().max().unwrap_or(0);
        (min, max)
    }
}

/// Row-major mask whose pixels are either 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub const ON: u8 = 255;

    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some(v) = values.iter().find(|&&v| v != 0 && v != 255) {
            return Err(Error::InvalidImage(format!("mask value {v} is not binary")));
        }
        Ok(Self { width, height, values })
    }

    /// All-background mask.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    /// Mask from a per-pixel predicate.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(if f(x, y) { 255 } else { 0 });
            }
        }
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] != 0
    }

    /// Like `get` but treats out-of-bounds coordinates as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.values[y * self.width + x] = if on { 255 } else { 0 };
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Foreground coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        same_dims(self.dims(), other.dims())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| if f(a != 0, b != 0) { 255 } else { 0 })
            .collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            values,
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    /// Pixels in `self` but not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn crop(&self, roi: &Roi) -> BinaryMask {
        let (w, h) = (roi.width(), roi.height());
        let mut values = Vec::with_capacity(w * h);
        for y in roi.y1..=roi.y2 {
            let row = y * self.width;
            values.extend_from_slice(&self.values[row + roi.x1..=row + roi.x2]);
        }
        BinaryMask {
            width: w,
            height: h,
            values,
        }
    }

    /// Places `self` into a `width` x `height` mask with its top-left corner at `(x0, y0)`.
    pub fn paste_into(&self, width: usize, height: usize, x0: usize, y0: usize) -> BinaryMask {
        let mut out = BinaryMask::empty(width, height);
        for (x, y) in self.foreground() {
            let (gx, gy) = (x + x0, y + y0);
            if gx < width && gy < height {
                out.set(gx, gy, true);
            }
        }
        out
    }

    /// Grey view of the mask (0/255).
    pub fn to_channel(&self) -> ChannelImage {
        ChannelImage {
            width: self.width,
            height: self.height,
            values: self.values.clone(),
        }
    }
}

/// Inclusive, axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Roi {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl Roi {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Self {
        debug_assert!(x1 <= x2 && y1 <= y2);
        Self { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> usize {
        self.x2 - self.x1 + 1
    }

    pub fn height(&self) -> usize {
        self.y2 - self.y1 + 1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) as f64 / 2.0, (self.y1 + self.y2) as f64 / 2.0)
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 as f64 && x <= self.x2 as f64 && y >= self.y1 as f64 && y <= self.y2 as f64
    }

    pub fn contains(&self, other: &Roi) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }

    pub fn intersection(&self, other: &Roi) -> Option<Roi> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 <= x2 && y1 <= y2).then_some(Roi { x1, y1, x2, y2 })
    }

    /// Bounding box of both rectangles.
    pub fn union(&self, other: &Roi) -> Roi {
        Roi {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }
}

/// 256-bin grey-level histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; 256],
}

impl Histogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn count(&self, f: u8) -> u64 {
        self.counts[f as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Smallest and largest occupied grey value.
    pub fn range(&self) -> Option<(u8, u8)> {
        let lo = self.counts.iter().position(|&c| c > 0)?;
        let hi = self.counts.iter().rposition(|&c| c > 0)?;
        Some((lo as u8, hi as u8))
    }
}

/// Histogram over the whole image, or only over pixels where `region` is set.
pub fn histogram(img: &ChannelImage, region: Option<&BinaryMask>) -> Result<Histogram> {
    let mut counts = [0u64; 256];
    match region {
        None => {
            for &v in img.values() {
                counts[v as usize] += 1;
            }
        }
        Some(mask) => {
            same_dims(img.dims(), mask.dims())?;
            for (&v, &m) in img.values().iter().zip(mask.values()) {
                if m != 0 {
                    counts[v as usize] += 1;
                }
            }
        }
    }
    Ok(Histogram { counts })
}

/// Which side of the threshold is kept as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Polarity {
    KeepAbove,
    KeepBelow,
}

/// Binarises with strict inequalities; pixels equal to `t` are background.
pub fn apply_threshold(img: &ChannelImage, t: u8, polarity: Polarity) -> BinaryMask {
    let values = img
        .values()
        .iter()
        .map(|&v| {
            let on = match polarity {
                Polarity::KeepAbove => v > t,
                Polarity::KeepBelow => v < t,
            };
            if on {
                255
            } else {
                0
            }
        })
        .collect();
    BinaryMask {
        width: img.width(),
        height: img.height(),
        values,
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "image must be at least 1x1, got {width}x{height}"
        )));
    }
    if len != width * height {
        return Err(Error::InvalidImage(format!(
            "buffer has {len} pixels, expected {}",
            width * height
        )));
    }
    Ok(())
}

pub(crate) fn same_dims(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
