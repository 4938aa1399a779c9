//! Rasterisation helpers for building masks from simple shapes.

use super::raster::BinaryMask;

/// Filled disc: pixels whose centre lies within `r` of `(cx, cy)`.
pub fn disc_mask(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| in_disc(x, y, cx, cy, r))
}

/// Filled axis-aligned rectangle with inclusive corners.
pub fn rect_mask(width: usize, height: usize, x1: usize, y1: usize, x2: usize, y2: usize) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| x >= x1 && x <= x2 && y >= y1 && y <= y2)
}

/// Filled axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
pub fn ellipse_mask(width: usize, height: usize, cx: f64, cy: f64, a: f64, b: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = ((x as f64 - cx) / a, (y as f64 - cy) / b);
        dx * dx + dy * dy <= 1.0
    })
}

#[inline]
pub fn in_disc(x: usize, y: usize, cx: f64, cy: f64, r: f64) -> bool {
    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
    dx * dx + dy * dy <= r * r
}
