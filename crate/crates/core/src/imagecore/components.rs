//! 8-connected component labelling, Moore border following and shape measures.

use std::collections::VecDeque;
use std::f64::consts::PI;

use super::raster::{BinaryMask, Roi};

/// Offsets of the 8-neighbourhood, clockwise on screen starting east.
pub(crate) const NEIGHBOURS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Closed outer boundary, counter-clockwise as displayed (y axis down).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    points: Vec<(i64, i64)>,
}

impl Contour {
    pub fn from_points(points: Vec<(i64, i64)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    /// Number of boundary pixels.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chain length of the closed boundary: axis steps count 1, diagonal steps sqrt(2).
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                if a.0 != b.0 && a.1 != b.1 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                }
            })
            .sum()
    }

    /// Twice the signed polygon area in image coordinates. Negative for
    /// counter-clockwise-as-displayed boundaries.
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum()
    }
}

/// Area, perimeter, centroid and circularity of a pixel set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShapeStats {
    pub area: usize,
    pub perimeter: f64,
    pub centroid: (f64, f64),
    pub circularity: f64,
}

/// `min(1, 4*pi*S / L^2)`; a zero perimeter (single pixel) counts as round.
pub fn circularity(area: usize, perimeter: f64) -> f64 {
    if perimeter <= 0.0 {
        return 1.0;
    }
    (4.0 * PI * area as f64 / (perimeter * perimeter)).min(1.0)
}

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pixels: Vec<(usize, usize)>,
    bbox: Roi,
}

impl Component {
    /// Builds a component from a pixel list. The caller guarantees connectivity.
    pub fn from_pixels(mut pixels: Vec<(usize, usize)>) -> Self {
        assert!(!pixels.is_empty(), "component must be nonempty");
        pixels.sort_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        for &(x, y) in &pixels {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
        }
        Self {
            pixels,
            bbox: Roi::new(x1, y1, x2, y2),
        }
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox(&self) -> Roi {
        self.bbox
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }

    /// Draws this component into a `width` x `height` mask.
    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(width, height);
        for &(x, y) in &self.pixels {
            m.set(x, y, true);
        }
        m
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pixels.binary_search_by_key(&(y, x), |&(px, py)| (py, px)).is_ok()
    }

    pub fn stats(&self) -> ShapeStats {
        shape_stats(self)
    }
}

/// 8-connected foreground components, ordered by their first pixel in raster order.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = mask.dims();
    let mut label = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if label[start] || mask.values()[start] == 0 {
            continue;
        }
        label[start] = true;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            pixels.push((x as usize, y as usize));
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !label[j] && mask.values()[j] != 0 {
                    label[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(Component::from_pixels(pixels));
    }
    out
}

/// The component with the most pixels; ties go to the earliest in raster order.
pub fn largest_component(mask: &BinaryMask) -> Option<Component> {
    connected_components(mask).into_iter().rev().max_by_key(|c| c.area())
}

/// Moore-neighbour border following of the component's outer boundary.
pub fn trace_contour(component: &Component) -> Contour {
    let bbox = component.bbox();
    // Local grid with a one-pixel background frame.
    let (gw, gh) = (bbox.width() + 2, bbox.height() + 2);
    let mut grid = vec![false; gw * gh];
    for &(x, y) in component.pixels() {
        grid[(y - bbox.y1 + 1) * gw + (x - bbox.x1 + 1)] = true;
    }
    let at = |p: (i64, i64)| grid[p.1 as usize * gw + p.0 as usize];

    let first = component.pixels()[0];
    let start = ((first.0 - bbox.x1 + 1) as i64, (first.1 - bbox.y1 + 1) as i64);
    let to_global = |p: (i64, i64)| (p.0 - 1 + bbox.x1 as i64, p.1 - 1 + bbox.y1 as i64);

    // Clockwise search around `cur` beginning at the background pixel `back`.
    let step = |cur: (i64, i64), back: (i64, i64)| -> Option<((i64, i64), (i64, i64))> {
        let offset = (back.0 - cur.0, back.1 - cur.1);
        let k0 = NEIGHBOURS.iter().position(|&d| d == offset)?;
        let mut prev = back;
        for i in 1..=8 {
            let d = NEIGHBOURS[(k0 + i) % 8];
            let cand = (cur.0 + d.0, cur.1 + d.1);
            if at(cand) {
                return Some((cand, prev));
            }
            prev = cand;
        }
        None
    };

    // The start pixel is first in raster order, so its west neighbour is background.
    let Some((second, back0)) = step(start, (start.0 - 1, start.1)) else {
        return Contour::from_points(vec![to_global(start)]);
    };
    let mut points = vec![start, second];
    let (mut cur, mut back) = (second, back0);
    loop {
        let (next, nb) = step(cur, back).expect("connected pixel has a neighbour");
        if cur == start && next == second {
            points.pop();
            break;
        }
        points.push(next);
        cur = next;
        back = nb;
        debug_assert!(points.len() <= 4 * gw * gh, "border following did not close");
    }
    // Tracing ran clockwise as displayed; flip to counter-clockwise keeping the start.
    points[1..].reverse();
    Contour::from_points(points.into_iter().map(to_global).collect())
}

/// Area (pixel count), chain-length perimeter, centroid and clamped circularity.
pub fn shape_stats(component: &Component) -> ShapeStats {
    let contour = trace_contour(component);
    let perimeter = contour.perimeter();
    ShapeStats {
        area: component.area(),
        perimeter,
        centroid: component.centroid(),
        circularity: circularity(component.area(), perimeter),
    }
}

/// Stats over several disjoint components treated as one object: areas and
/// perimeters add, the centroid is over all pixels.
pub fn union_stats(components: &[&Component]) -> ShapeStats {
    let area: usize = components.iter().map(|c| c.area()).sum();
    let perimeter: f64 = components.iter().map(|c| trace_contour(c).perimeter()).sum();
    let (mut sx, mut sy) = (0.0, 0.0);
    for c in components {
        for &(x, y) in c.pixels() {
            sx += x as f64;
            sy += y as f64;
        }
    }
    ShapeStats {
        area,
        perimeter,
        centroid: (sx / area as f64, sy / area as f64),
        circularity: circularity(area, perimeter),
    }
}
