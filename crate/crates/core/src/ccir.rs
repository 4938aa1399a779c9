//! Concave-convex iterative repair of a cell mask that touches neighbouring
//! cells.
//!
//! The outer contour is expressed in polar form about the nucleus centroid.
//! Concave corners of the contour are located from its turning angle; two
//! consecutive corners bound a protrusion (an adhering cell). The protrusion's
//! radial samples are replaced by a linear ramp between the two poles and the
//! contour is filled back into a mask. A repair is kept only if it lowers the
//! pole count and the area and raises circularity by a fixed factor.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imagecore::{circularity, connected_components, trace_contour, BinaryMask, Component, Contour};

/// Tunables of pole detection and of the repair loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcirConfig {
    /// Centred moving-average window applied to contour coordinates.
    pub smoothing_window: usize,
    /// Minimum run of concave samples that counts as a pole.
    pub persistence: usize,
    /// Chord length, in contour samples, used to measure the turning angle.
    pub chord: usize,
    /// Turning angle in degrees below which a sample is concave.
    pub concave_turn_deg: f64,
    /// Required circularity ratio after a repair.
    pub circularity_gain: f64,
    /// Centroid displacement, in pixels, that counts as converged.
    pub centroid_epsilon: f64,
    /// Pole-pair count below which a converged centroid stops the loop.
    pub pole_pair_threshold: usize,
    pub max_iterations: usize,
}

impl Default for CcirConfig {
    fn default() -> Self {
        Self {
            smoothing_window: 5,
            persistence: 3,
            chord: 4,
            concave_turn_deg: 30.0,
            circularity_gain: 1.05,
            centroid_epsilon: 1.5,
            pole_pair_threshold: 2,
            max_iterations: 10,
        }
    }
}

impl CcirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(Error::InvalidParameter("smoothing_window must be odd".into()));
        }
        if self.chord == 0 || self.persistence == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "chord, persistence and max_iterations must be positive".into(),
            ));
        }
        if !(self.circularity_gain.is_finite() && self.circularity_gain > 0.0) {
            return Err(Error::InvalidParameter("circularity_gain must be positive".into()));
        }
        Ok(())
    }
}

/// Contour samples in polar form about an origin, indexed from the start point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarContour {
    origin: (f64, f64),
    /// Index of the start point in the source contour.
    start_index: usize,
    /// Image angle (radians) of the ray from the origin to the start point.
    start_angle: f64,
    /// +1 when angles increase clockwise on screen, -1 otherwise.
    orientation: f64,
    /// `(rho, theta)`; theta in degrees in `[0, 360)`.
    samples: Vec<(f64, f64)>,
}

impl PolarContour {
    /// Polar form of `contour` about `origin`, starting at `start_index`.
    /// Theta grows in the traversal direction.
    pub fn new(contour: &Contour, origin: (f64, f64), start_index: usize) -> Result<Self> {
        let n = contour.len();
        if n < 4 {
            return Err(Error::ContourTooShort { needed: 4, got: n });
        }
        if start_index >= n {
            return Err(Error::InvalidParameter(format!("start index {start_index} out of {n}")));
        }
        let orientation = if contour.signed_area2() < 0 { -1.0 } else { 1.0 };
        let pts = contour.points();
        let angle = |p: (i64, i64)| (p.1 as f64 - origin.1).atan2(p.0 as f64 - origin.0);
        let start_angle = angle(pts[start_index]);
        let samples = (0..n)
            .map(|k| {
                let p = pts[(start_index + k) % n];
                let rho = (p.0 as f64 - origin.0).hypot(p.1 as f64 - origin.1).max(f64::EPSILON);
                let theta = (orientation * (angle(p) - start_angle)).to_degrees().rem_euclid(360.0);
                (rho, theta)
            })
            .collect();
        Ok(Self {
            origin,
            start_index,
            start_angle,
            orientation,
            samples,
        })
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Cartesian position of sample `i`.
    pub fn point(&self, i: usize) -> (f64, f64) {
        let (rho, theta) = self.samples[i];
        let a = self.start_angle + self.orientation * theta.to_radians();
        (self.origin.0 + rho * a.cos(), self.origin.1 + rho * a.sin())
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Signed turning angle (degrees) at every sample, positive where the
    /// contour bends towards its interior.
    pub fn turning_angles(&self, config: &CcirConfig) -> Vec<f64> {
        let pts = smooth_closed(&self.points(), config.smoothing_window);
        let n = pts.len();
        let k = config.chord.min(n / 3).max(1);
        // Convex turns have the sign of the traversal's signed area.
        let area_sign = polygon_area2(&pts).signum();
        (0..n)
            .map(|i| {
                let (p, a, b) = (pts[i], pts[(i + n - k) % n], pts[(i + k) % n]);
                let v1 = (p.0 - a.0, p.1 - a.1);
                let v2 = (b.0 - p.0, b.1 - p.1);
                let cross = v1.0 * v2.1 - v1.1 * v2.0;
                let dot = v1.0 * v2.0 + v1.1 * v2.1;
                area_sign * cross.atan2(dot).to_degrees()
            })
            .collect()
    }
}

/// Two poles bounding a protrusion. The repaired arc runs forward from `m`
/// to `n`, wrapping past the end when `m > n`; `w` counts its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PolePair {
    pub m: usize,
    pub n: usize,
    pub w: usize,
}

impl PolePair {
    /// Orients the pair so that the arc from `m` to `n` is the given one.
    fn forward(m: usize, n: usize, len: usize) -> Self {
        Self {
            m,
            n,
            w: (n + len - m) % len + 1,
        }
    }

    fn arc(&self, len: usize) -> impl Iterator<Item = usize> {
        let m = self.m;
        (0..self.w).map(move |k| (m + k) % len)
    }
}

/// Result of one tentative repair.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub mask: BinaryMask,
    pub pair: PolePair,
    pub poles_before: usize,
    pub poles_after: usize,
    pub circularity_before: f64,
    pub circularity_after: f64,
    pub area_before: usize,
    pub area_after: usize,
    pub accepted: bool,
}

fn smooth_closed(pts: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    let n = pts.len();
    let half = (window / 2).min(n.saturating_sub(1) / 2);
    if half == 0 {
        return pts.to_vec();
    }
    let span = (2 * half + 1) as f64;
    (0..n)
        .map(|i| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for d in 0..=2 * half {
                let p = pts[(i + n + d - half) % n];
                sx += p.0;
                sy += p.1;
            }
            (sx / span, sy / span)
        })
        .collect()
}

fn polygon_area2(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

/// Distinct runs of contour pixels met when walking the closed segment from
/// contour point `from` to `to`. The run containing `from` counts.
fn segment_crossings(contour_set: &HashSet<(i64, i64)>, from: (i64, i64), to: (f64, f64)) -> usize {
    let (fx, fy) = (from.0 as f64, from.1 as f64);
    let steps = ((to.0 - fx).abs().max((to.1 - fy).abs()) * 4.0).ceil().max(1.0) as usize;
    let mut runs = 0;
    let mut inside = false;
    let mut last = None;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let p = (
            (fx + t * (to.0 - fx)).round() as i64,
            (fy + t * (to.1 - fy)).round() as i64,
        );
        if last == Some(p) {
            continue;
        }
        last = Some(p);
        let on = contour_set.contains(&p);
        if on && !inside {
            runs += 1;
        }
        inside = on;
    }
    runs
}

/// Start point of the polar representation. The contour point nearest the
/// origin is tried first, then points `2^k mod L`; the first candidate whose
/// segment to the origin meets the contour in exactly two places wins. After
/// `ceil(log2 L) + 4` probes the nearest point is used.
pub fn select_start(contour: &Contour, origin: (f64, f64)) -> Result<usize> {
    let n = contour.len();
    if n < 4 {
        return Err(Error::ContourTooShort { needed: 4, got: n });
    }
    let pts = contour.points();
    let dist2 = |p: (i64, i64)| (p.0 as f64 - origin.0).powi(2) + (p.1 as f64 - origin.1).powi(2);
    let nearest = (0..n)
        .min_by(|&a, &b| dist2(pts[a]).total_cmp(&dist2(pts[b])))
        .expect("non-empty contour");
    let set: HashSet<(i64, i64)> = pts.iter().copied().collect();
    let max_probes = (n as f64).log2().ceil() as u32 + 4;
    let mut candidate = nearest;
    for sp in 1..=max_probes + 1 {
        if segment_crossings(&set, pts[candidate], origin) == 2 {
            return Ok(candidate);
        }
        if sp > max_probes {
            break;
        }
        candidate = pow2_mod(sp, n);
    }
    Ok(nearest)
}

fn pow2_mod(exp: u32, n: usize) -> usize {
    let mut v = 1usize % n;
    for _ in 0..exp {
        v = (v * 2) % n;
    }
    v
}

/// Concave corners of the contour: runs of at least `persistence` samples
/// whose turning angle is below `-concave_turn_deg`, each reduced to its
/// sharpest sample. Indices are ascending.
pub fn detect_concave_poles(polar: &PolarContour, config: &CcirConfig) -> Vec<usize> {
    let n = polar.len();
    let turns = polar.turning_angles(config);
    let concave: Vec<bool> = turns.iter().map(|&t| t < -config.concave_turn_deg).collect();
    if concave.iter().all(|&c| c) || concave.iter().all(|&c| !c) {
        return Vec::new();
    }
    // Begin scanning just after a convex sample so no run straddles the seam.
    let seam = (0..n).find(|&i| !concave[i]).expect("some sample is convex");
    let mut poles = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    for k in 1..=n {
        let i = (seam + k) % n;
        if concave[i] {
            run.push(i);
        } else if !run.is_empty() {
            if run.len() >= config.persistence {
                let best = *run
                    .iter()
                    .min_by(|&&a, &&b| turns[a].total_cmp(&turns[b]))
                    .expect("non-empty run");
                poles.push(best);
            }
            run.clear();
        }
    }
    poles.sort_unstable();
    poles
}

/// Pole pairs ordered along the contour from the start point. Poles are
/// paired with a cyclic neighbour; of the two possible pairings the one whose
/// repaired arcs lie farthest from the origin wins. Of the two arcs between a
/// pair, the one lying farther from the origin on average is the protrusion.
pub fn detect_poles(polar: &PolarContour, config: &CcirConfig) -> Vec<PolePair> {
    let poles = detect_concave_poles(polar, config);
    let len = polar.len();
    let k = poles.len();
    if k < 2 {
        return Vec::new();
    }
    let mean_rho = |pair: &PolePair| pair.arc(len).map(|i| polar.samples[i].0).sum::<f64>() / pair.w as f64;
    let pairing = |offset: usize| -> (f64, Vec<PolePair>) {
        let pairs: Vec<PolePair> = (0..k / 2)
            .map(|j| {
                let (a, b) = (poles[(offset + 2 * j) % k], poles[(offset + 2 * j + 1) % k]);
                let there = PolePair::forward(a, b, len);
                let back = PolePair::forward(b, a, len);
                if mean_rho(&back) > mean_rho(&there) {
                    back
                } else {
                    there
                }
            })
            .collect();
        (pairs.iter().map(mean_rho).sum(), pairs)
    };
    let (score0, mut best) = pairing(0);
    if k >= 4 {
        let (score1, alt) = pairing(1);
        if score1 > score0 {
            best = alt;
        }
    }
    best.sort_by_key(|p| p.m.min(p.n));
    best
}

/// Linear ramp of rho across the pair's arc; endpoints keep their values.
/// Theta is spread evenly over the angular gap left by the rest of the
/// contour so the repaired outline stays simple.
pub fn repair_pair(polar: &PolarContour, pair: &PolePair) -> Result<PolarContour> {
    let len = polar.len();
    if pair.w < 2 || pair.m == pair.n || pair.m >= len || pair.n >= len {
        return Err(Error::InvalidParameter(format!(
            "pole pair {pair:?} spans fewer than 2 samples"
        )));
    }
    let (rho_m, theta_m) = polar.samples[pair.m];
    let (rho_n, _) = polar.samples[pair.n];
    // Angle swept by the kept arc, from n forward to m.
    let kept = PolePair::forward(pair.n, pair.m, len);
    let kept_sweep: f64 = kept
        .arc(len)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| wrap_deg(polar.samples[w[1]].1 - polar.samples[w[0]].1))
        .sum();
    let gap = 360.0 - kept_sweep;
    let steps = (pair.w - 1) as f64;
    let delta = (rho_n - rho_m) / steps;
    let mut out = polar.clone();
    for (k, i) in pair.arc(len).enumerate() {
        let rho = if k + 1 == pair.w {
            rho_n
        } else {
            rho_m + k as f64 * delta
        };
        let theta = if k == 0 {
            theta_m
        } else if k + 1 == pair.w {
            polar.samples[pair.n].1
        } else {
            (theta_m + gap * k as f64 / steps).rem_euclid(360.0)
        };
        out.samples[i] = (rho, theta);
    }
    Ok(out)
}

fn wrap_deg(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

/// Fills the closed polygon through the samples, boundary included.
pub fn rasterize(polar: &PolarContour, width: usize, height: usize) -> BinaryMask {
    // Snap trigonometric round-off so pixel-centre vertices stay exact.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-6 { v.round() } else { v };
    let pts: Vec<(f64, f64)> = polar.points().into_iter().map(|(x, y)| (snap(x), snap(y))).collect();
    let mut mask = BinaryMask::empty(width, height);
    let n = pts.len();
    let put = |x: i64, y: i64, mask: &mut BinaryMask| {
        if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
            mask.set(x as usize, y as usize, true);
        }
    };
    for y in 0..height {
        let yc = y as f64;
        let mut xs: Vec<f64> = Vec::new();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            if (a.1 <= yc && yc < b.1) || (b.1 <= yc && yc < a.1) {
                xs.push(a.0 + (yc - a.1) / (b.1 - a.1) * (b.0 - a.0));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            let (x0, x1) = (span[0].ceil() as i64, span[1].floor() as i64);
            for x in x0..=x1 {
                put(x, y as i64, &mut mask);
            }
        }
    }
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            put(
                (a.0 + t * (b.0 - a.0)).round() as i64,
                (a.1 + t * (b.1 - a.1)).round() as i64,
                &mut mask,
            );
        }
    }
    mask
}

/// The component holding `origin`, else the one whose centroid is nearest.
fn target_component(mask: &BinaryMask, origin: (f64, f64)) -> Option<Component> {
    let comps = connected_components(mask);
    let (ox, oy) = (origin.0.round(), origin.1.round());
    if ox >= 0.0 && oy >= 0.0 {
        if let Some(c) = comps.iter().find(|c| c.contains(ox as usize, oy as usize)) {
            return Some(c.clone());
        }
    }
    comps.into_iter().min_by(|a, b| {
        let d = |c: &Component| {
            let (cx, cy) = c.centroid();
            (cx - origin.0).hypot(cy - origin.1)
        };
        d(a).total_cmp(&d(b))
    })
}

/// Snapshot of one shape for the acceptance test.
struct Shape {
    component: Component,
    contour: Contour,
    polar: Option<PolarContour>,
    poles: usize,
    pairs: Vec<PolePair>,
    circularity: f64,
}

impl Shape {
    fn measure(component: Component, origin: (f64, f64), config: &CcirConfig) -> Self {
        let contour = trace_contour(&component);
        let circ = circularity(component.area(), contour.perimeter());
        let polar = select_start(&contour, origin)
            .and_then(|s| PolarContour::new(&contour, origin, s))
            .ok();
        let (poles, pairs) = match &polar {
            Some(p) => (detect_concave_poles(p, config).len(), detect_poles(p, config)),
            None => (0, Vec::new()),
        };
        Self {
            component,
            contour,
            polar,
            poles,
            pairs,
            circularity: circ,
        }
    }
}

/// Tentative repair of one pair, evaluated against the acceptance rule.
fn try_repair(
    shape: &Shape,
    pair: &PolePair,
    origin: (f64, f64),
    dims: (usize, usize),
    config: &CcirConfig,
) -> Option<RepairOutcome> {
    let polar = shape.polar.as_ref()?;
    let repaired = repair_pair(polar, pair).ok()?;
    let current = shape.component.to_mask(dims.0, dims.1);
    let filled = rasterize(&repaired, dims.0, dims.1).intersection(&current).ok()?;
    let comp = target_component(&filled, origin)?;
    let after = Shape::measure(comp, origin, config);
    let accepted = after.poles < shape.poles
        && after.circularity >= config.circularity_gain * shape.circularity
        && after.component.area() < shape.component.area();
    Some(RepairOutcome {
        mask: after.component.to_mask(dims.0, dims.1),
        pair: *pair,
        poles_before: shape.poles,
        poles_after: after.poles,
        circularity_before: shape.circularity,
        circularity_after: after.circularity,
        area_before: shape.component.area(),
        area_after: after.component.area(),
        accepted,
    })
}

/// Full run record: the final mask plus every committed repair.
#[derive(Debug, Clone, PartialEq)]
pub struct CcirRun {
    pub mask: BinaryMask,
    pub committed: Vec<RepairOutcome>,
    pub iterations: usize,
    trace: String,
}

impl CcirRun {
    /// Per-iteration contour samples as CSV:
    /// `iteration,index,x,y,rho,theta,turn,pole`.
    pub fn trace_csv(&self) -> &str {
        &self.trace
    }
}

/// Repairs the mask's target component; see [`ccir_run`].
pub fn ccir(mask: &BinaryMask, origin: (f64, f64), config: &CcirConfig) -> Result<BinaryMask> {
    Ok(ccir_run(mask, origin, config)?.mask)
}

/// Iterates detection and repair. Each iteration commits the first pole pair
/// whose repair passes the acceptance rule. The loop stops when no repair is
/// committed, when the centroid has settled and fewer than
/// `pole_pair_threshold` pairs remain, or after `max_iterations`.
///
/// The result holds only the component containing `origin` (or the nearest
/// one); an empty mask is returned unchanged.
pub fn ccir_run(mask: &BinaryMask, origin: (f64, f64), config: &CcirConfig) -> Result<CcirRun> {
    config.validate()?;
    let dims = mask.dims();
    let mut trace = String::from("iteration,index,x,y,rho,theta,turn,pole\n");
    let Some(comp) = target_component(mask, origin) else {
        return Ok(CcirRun {
            mask: mask.clone(),
            committed: Vec::new(),
            iterations: 0,
            trace,
        });
    };
    let mut shape = Shape::measure(comp, origin, config);
    let mut committed = Vec::new();
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        append_trace(&mut trace, iterations, &shape, config);
        let outcome = shape
            .pairs
            .iter()
            .filter_map(|p| try_repair(&shape, p, origin, dims, config))
            .find(|o| o.accepted);
        let Some(outcome) = outcome else {
            break;
        };
        let old_centroid = shape.component.centroid();
        let comp = largest_of(&outcome.mask).expect("accepted repair is non-empty");
        shape = Shape::measure(comp, origin, config);
        committed.push(outcome);
        let (cx, cy) = shape.component.centroid();
        let moved = (cx - old_centroid.0).hypot(cy - old_centroid.1);
        if moved < config.centroid_epsilon && shape.pairs.len() < config.pole_pair_threshold {
            break;
        }
    }
    Ok(CcirRun {
        mask: shape.component.to_mask(dims.0, dims.1),
        committed,
        iterations,
        trace,
    })
}

fn largest_of(mask: &BinaryMask) -> Option<Component> {
    crate::imagecore::largest_component(mask)
}

fn append_trace(out: &mut String, iteration: usize, shape: &Shape, config: &CcirConfig) {
    let Some(polar) = &shape.polar else {
        return;
    };
    let turns = polar.turning_angles(config);
    let poles: HashSet<usize> = detect_concave_poles(polar, config).into_iter().collect();
    for (i, &(rho, theta)) in polar.samples().iter().enumerate() {
        let p = shape.contour.points()[(polar.start_index + i) % shape.contour.len()];
        let _ = writeln!(
            out,
            "{iteration},{i},{},{},{rho:.4},{theta:.4},{:.4},{}",
            p.0,
            p.1,
            turns[i],
            u8::from(poles.contains(&i))
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::draw::{disc_mask, ellipse_mask, rect_mask};
    use crate::imagecore::largest_component;

    fn polar_of(mask: &BinaryMask, origin: (f64, f64)) -> PolarContour {
        let c = largest_component(mask).unwrap();
        let contour = trace_contour(&c);
        let s = select_start(&contour, origin).unwrap();
        PolarContour::new(&contour, origin, s).unwrap()
    }

    fn two_discs() -> (BinaryMask, BinaryMask, BinaryMask) {
        let a = disc_mask(120, 80, 40.0, 40.0, 20.0);
        let b = disc_mask(120, 80, 70.0, 40.0, 20.0);
        (a.union(&b).unwrap(), a, b)
    }

    #[test]
    fn theta_is_zero_at_start_and_increases_on_a_disc() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let p = polar_of(&d, (40.0, 40.0));
        assert_eq!(p.samples()[0].1, 0.0);
        let thetas: Vec<f64> = p.samples().iter().map(|s| s.1).collect();
        let rises = thetas.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rises >= thetas.len() - 3, "{rises} of {}", thetas.len());
        for &(rho, _) in p.samples() {
            assert!(rho > 17.0 && rho < 21.0);
        }
    }

    #[test]
    fn polar_round_trip_reproduces_contour() {
        let d = ellipse_mask(80, 80, 40.0, 40.0, 25.0, 12.0);
        let c = largest_component(&d).unwrap();
        let contour = trace_contour(&c);
        let p = PolarContour::new(&contour, (40.0, 40.0), 7).unwrap();
        for i in 0..p.len() {
            let q = contour.points()[(7 + i) % contour.len()];
            let (x, y) = p.point(i);
            assert!((x - q.0 as f64).abs() < 1e-9 && (y - q.1 as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn short_contour_is_rejected() {
        let c = Contour::from_points(vec![(0, 0), (1, 0), (1, 1)]);
        assert!(matches!(
            select_start(&c, (0.5, 0.5)),
            Err(Error::ContourTooShort { .. })
        ));
    }

    #[test]
    fn diamond_start_is_valid() {
        let c = Contour::from_points(vec![(1, 0), (0, 1), (1, 2), (2, 1)]);
        assert!(select_start(&c, (1.0, 1.0)).unwrap() < 4);
    }

    #[test]
    fn disc_start_falls_back_to_nearest() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let c = largest_component(&d).unwrap();
        let contour = trace_contour(&c);
        let set: HashSet<_> = contour.points().iter().copied().collect();
        for &p in contour.points() {
            assert_eq!(segment_crossings(&set, p, (40.0, 40.0)), 1);
        }
        let s = select_start(&contour, (40.3, 40.1)).unwrap();
        let dist = |p: (i64, i64)| (p.0 as f64 - 40.3).hypot(p.1 as f64 - 40.1);
        let best = contour.points().iter().map(|&p| dist(p)).fold(f64::INFINITY, f64::min);
        assert_eq!(dist(contour.points()[s]), best);
    }

    #[test]
    fn convex_shapes_have_no_poles() {
        let cfg = CcirConfig::default();
        for (mask, o) in [
            (disc_mask(80, 80, 40.0, 40.0, 20.0), (40.0, 40.0)),
            (disc_mask(120, 120, 60.0, 60.0, 45.0), (60.0, 60.0)),
            (disc_mask(40, 40, 20.0, 20.0, 8.0), (20.0, 20.0)),
            (ellipse_mask(100, 80, 50.0, 40.0, 35.0, 15.0), (50.0, 40.0)),
            (rect_mask(80, 80, 20, 20, 60, 50), (40.0, 35.0)),
        ] {
            let p = polar_of(&mask, o);
            assert!(detect_concave_poles(&p, &cfg).is_empty());
            assert!(detect_poles(&p, &cfg).is_empty());
        }
    }

    #[test]
    fn two_discs_have_poles_at_the_necks() {
        let (m, _, _) = two_discs();
        let p = polar_of(&m, (40.0, 40.0));
        let poles = detect_concave_poles(&p, &CcirConfig::default());
        assert_eq!(poles.len(), 2);
        // Necks are at x = 55, y = 40 -/+ 13.2.
        let mut ys: Vec<f64> = poles
            .iter()
            .map(|&i| {
                let (x, y) = p.point(i);
                assert!((x - 55.0).abs() <= 3.0, "x {x}");
                y
            })
            .collect();
        ys.sort_by(f64::total_cmp);
        assert!((ys[0] - 26.8).abs() <= 3.0 && (ys[1] - 53.2).abs() <= 3.0, "{ys:?}");
        let pairs = detect_poles(&p, &CcirConfig::default());
        assert_eq!(pairs.len(), 1);
        // The repaired arc is the far disc.
        for i in pairs[0].arc(p.len()).skip(2).take(pairs[0].w - 4) {
            assert!(p.point(i).0 > 54.0);
        }
    }

    #[test]
    fn notched_disc_has_one_pair() {
        // A square notch has two sharp concave corners at its inner end.
        let d = disc_mask(100, 100, 50.0, 50.0, 30.0)
            .difference(&rect_mask(100, 100, 70, 44, 99, 56))
            .unwrap();
        let p = polar_of(&d, (50.0, 50.0));
        assert_eq!(detect_poles(&p, &CcirConfig::default()).len(), 1);
    }

    #[test]
    fn ramp_is_linear_with_exact_endpoints() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let mut p = polar_of(&d, (40.0, 40.0));
        p.samples[3].0 = 10.0;
        p.samples[8].0 = 20.0;
        let pair = PolePair::forward(3, 8, p.len());
        assert_eq!(pair.w, 6);
        let r = repair_pair(&p, &pair).unwrap();
        let rhos: Vec<f64> = (3..=8).map(|i| r.samples()[i].0).collect();
        for (got, want) in rhos.iter().zip([10.0, 12.0, 14.0, 16.0, 18.0, 20.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(r.samples()[3].0, 10.0);
        assert_eq!(r.samples()[8].0, 20.0);
        p.samples[8].0 = 10.0;
        let flat = repair_pair(&p, &pair).unwrap();
        assert!((3..=8).all(|i| flat.samples()[i].0 == 10.0));
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let p = polar_of(&d, (40.0, 40.0));
        let bad = PolePair { m: 4, n: 4, w: 1 };
        assert!(repair_pair(&p, &bad).is_err());
    }

    #[test]
    fn rasterized_disc_contour_recovers_disc() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let p = polar_of(&d, (40.0, 40.0));
        assert_eq!(rasterize(&p, 80, 80), d);
    }

    #[test]
    fn disc_is_a_fixpoint() {
        let d = disc_mask(80, 80, 40.0, 40.0, 20.0);
        let run = ccir_run(&d, (40.0, 40.0), &CcirConfig::default()).unwrap();
        assert_eq!(run.mask, d);
        assert!(run.committed.is_empty());
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn empty_mask_is_unchanged() {
        let e = BinaryMask::empty(10, 10);
        assert_eq!(ccir(&e, (5.0, 5.0), &CcirConfig::default()).unwrap(), e);
    }

    #[test]
    fn two_discs_are_separated() {
        let (m, a, b) = two_discs();
        let cfg = CcirConfig::default();
        let run = ccir_run(&m, (40.0, 40.0), &cfg).unwrap();
        assert!(!run.committed.is_empty());
        for o in &run.committed {
            assert!(o.accepted);
            assert!(o.poles_after < o.poles_before);
            assert!(o.circularity_after >= 1.05 * o.circularity_before);
            assert!(o.area_after < o.area_before);
        }
        let out = &run.mask;
        assert_eq!(out.difference(&m).unwrap().count(), 0);
        let kept_a = out.intersection(&a).unwrap().count() as f64 / a.count() as f64;
        let only_b = b.difference(&a).unwrap();
        let kept_b = out.intersection(&only_b).unwrap().count() as f64 / only_b.count() as f64;
        assert!(kept_a >= 0.9, "kept {kept_a} of disc A");
        assert!(kept_b <= 0.1, "kept {kept_b} of disc B");
        assert_eq!(ccir(out, (40.0, 40.0), &cfg).unwrap(), *out);
        assert!(run.trace_csv().lines().count() > 100);
    }

    #[test]
    fn double_adhesion_needs_two_repairs() {
        let a = disc_mask(160, 80, 80.0, 40.0, 20.0);
        let m = a
            .union(&disc_mask(160, 80, 50.0, 40.0, 18.0))
            .unwrap()
            .union(&disc_mask(160, 80, 110.0, 40.0, 18.0))
            .unwrap();
        let cfg = CcirConfig::default();
        let run = ccir_run(&m, (80.0, 40.0), &cfg).unwrap();
        assert_eq!(run.committed.len(), 2);
        let kept_a = run.mask.intersection(&a).unwrap().count() as f64 / a.count() as f64;
        assert!(kept_a >= 0.9);
        let p = polar_of(&run.mask, (80.0, 40.0));
        assert!(detect_poles(&p, &cfg).is_empty());
        assert_eq!(ccir(&run.mask, (80.0, 40.0), &cfg).unwrap(), run.mask);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = CcirConfig {
            smoothing_window: 4,
            ..CcirConfig::default()
        };
        assert!(ccir(&disc_mask(10, 10, 5.0, 5.0, 3.0), (5.0, 5.0), &cfg).is_err());
    }
}
