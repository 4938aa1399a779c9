//! Binary morphology used to clean masks.

use std::collections::VecDeque;

use super::components::connected_components;
use super::raster::BinaryMask;

/// Structuring element offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// 3x3 cross (centre plus 4-neighbours).
    Cross,
    /// Full 3x3 square.
    Square,
}

impl Kernel {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Kernel::Cross => &[(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)],
            Kernel::Square => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (0, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Pixels outside the image count as background for both operations.
pub fn erode(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    let offs = kernel.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offs.iter()
            .all(|&(dx, dy)| mask.get_signed(x as i64 + dx, y as i64 + dy))
    })
}

pub fn dilate(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    let offs = kernel.offsets();
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        offs.iter()
            .any(|&(dx, dy)| mask.get_signed(x as i64 - dx, y as i64 - dy))
    })
}

/// Erosion followed by dilation.
pub fn open(mask: &BinaryMask, kernel: Kernel) -> BinaryMask {
    dilate(&erode(mask, kernel), kernel)
}

/// Sets every background pixel not 4-connected to the image border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = y * w + x;
        if !outside[i] && !mask.get(x, y) {
            outside[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        seed(w - 1, y, &mut outside, &mut queue);
    }
    while let Some((x, y)) = queue.pop_front() {
        let (xi, yi) = (x as i64, y as i64);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (xi + dx, yi + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                seed(nx as usize, ny as usize, &mut outside, &mut queue);
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| !outside[y * w + x])
}

/// Drops components smaller than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    for c in connected_components(mask) {
        if c.area() >= min_area {
            for &(x, y) in c.pixels() {
                out.set(x, y, true);
            }
        }
    }
    out
}
