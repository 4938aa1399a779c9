//! Segmentation metrics against ground truth and a seeded synthetic
//! blood-smear generator that supplies that ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imagecore::draw::in_disc;
use crate::imagecore::{BinaryMask, RasterImage};

/// Pixel counts and rates of one prediction against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    /// Segmentation accuracy in percent.
    pub sa: f64,
    pub or_rate: f64,
    pub ur_rate: f64,
    pub er_rate: f64,
    /// Ground-truth pixels.
    pub rs: usize,
    /// Predicted pixels.
    pub ts: usize,
    /// Predicted but not in the ground truth.
    pub os: usize,
    /// In the ground truth but not predicted.
    pub us: usize,
}

/// Misclassified pixels are the symmetric difference, so `SA = 100 (1 - ER)`.
pub fn evaluate(gt: &BinaryMask, pred: &BinaryMask) -> Result<EvalReport> {
    let os = pred.difference(gt)?.count();
    let us = gt.difference(pred)?.count();
    let rs = gt.count();
    if rs == 0 {
        return Err(Error::InvalidParameter("ground truth is empty".into()));
    }
    let er = (os + us) as f64 / rs as f64;
    Ok(EvalReport {
        sa: 100.0 * (1.0 - er),
        or_rate: os as f64 / (rs + os) as f64,
        ur_rate: us as f64 / (rs + os) as f64,
        er_rate: er,
        rs,
        ts: pred.count(),
        os,
        us,
    })
}

/// Mean and population standard deviation of each rate over several reports.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReportSummary {
    pub count: usize,
    pub sa_mean: f64,
    pub sa_sd: f64,
    pub or_mean: f64,
    pub or_sd: f64,
    pub ur_mean: f64,
    pub ur_sd: f64,
    pub er_mean: f64,
    pub er_sd: f64,
}

pub fn summarize(reports: &[EvalReport]) -> Option<ReportSummary> {
    if reports.is_empty() {
        return None;
    }
    let stat = |f: fn(&EvalReport) -> f64| {
        let n = reports.len() as f64;
        let mean = reports.iter().map(f).sum::<f64>() / n;
        let var = reports.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let (sa_mean, sa_sd) = stat(|r| r.sa);
    let (or_mean, or_sd) = stat(|r| r.or_rate);
    let (ur_mean, ur_sd) = stat(|r| r.ur_rate);
    let (er_mean, er_sd) = stat(|r| r.er_rate);
    Some(ReportSummary {
        count: reports.len(),
        sa_mean,
        sa_sd,
        or_mean,
        or_sd,
        ur_mean,
        ur_sd,
        er_mean,
        er_sd,
    })
}

/// RGB colours of the phantom's classes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Palette {
    pub background: [u8; 3],
    pub erythrocyte: [u8; 3],
    /// Paler centre of each erythrocyte.
    pub pallor: [u8; 3],
    pub cytoplasm: [u8; 3],
    pub nucleus: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [232, 226, 212],
            erythrocyte: [222, 168, 160],
            pallor: [228, 190, 182],
            cytoplasm: [176, 140, 212],
            nucleus: [110, 40, 140],
        }
    }
}

/// Geometry, colour and noise of a phantom.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    pub width: usize,
    pub height: usize,
    pub leukocytes: usize,
    /// Cell radius range in pixels.
    pub cell_radius: (f64, f64),
    /// Nucleus lobe count range, each in `1..=4`.
    pub lobes: (u8, u8),
    pub erythrocytes: usize,
    pub erythrocyte_radius: (f64, f64),
    /// Overlap depth of one erythrocyte per leukocyte, as a fraction of the
    /// erythrocyte diameter; zero disables adhesion.
    pub adhesion: f64,
    /// Standard deviation of additive Gaussian noise per channel.
    pub noise_sigma: f64,
    pub palette: Palette,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            leukocytes: 1,
            cell_radius: (28.0, 34.0),
            lobes: (1, 4),
            erythrocytes: 14,
            erythrocyte_radius: (14.0, 17.0),
            adhesion: 0.0,
            noise_sigma: 0.0,
            palette: Palette::default(),
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.width < 16 || self.height < 16 {
            return bad("phantom must be at least 16x16");
        }
        if !(self.cell_radius.0 >= 4.0 && self.cell_radius.0 <= self.cell_radius.1) {
            return bad("cell_radius must be an ordered range starting at 4 or more");
        }
        if !(self.erythrocyte_radius.0 >= 2.0 && self.erythrocyte_radius.0 <= self.erythrocyte_radius.1) {
            return bad("erythrocyte_radius must be an ordered range starting at 2 or more");
        }
        if !(1 <= self.lobes.0 && self.lobes.0 <= self.lobes.1 && self.lobes.1 <= 4) {
            return bad("lobes must be an ordered range within 1..=4");
        }
        if !(0.0..1.0).contains(&self.adhesion) {
            return bad("adhesion must lie in [0, 1)");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        Ok(())
    }
}

/// A disc in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disc {
    fn contains(&self, x: usize, y: usize) -> bool {
        in_disc(x, y, self.cx, self.cy, self.r)
    }

    fn gap(&self, other: &Disc) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy) - self.r - other.r
    }
}

/// One synthetic leukocyte: cell disc and nucleus lobes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LeukocyteSpec {
    pub cell: Disc,
    pub lobes: Vec<Disc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: RasterImage,
    pub gt_cell: BinaryMask,
    pub gt_nucleus: BinaryMask,
    pub gt_rbc: BinaryMask,
    pub leukocytes: Vec<LeukocyteSpec>,
    pub erythrocytes: Vec<Disc>,
    pub seed: u64,
    pub params: PhantomParams,
}

const PLACEMENT_ATTEMPTS: usize = 2000;

/// Nucleus lobes for a cell; lobes overlap so the nucleus is one piece and
/// stay well inside the cell.
pub fn nucleus_lobes(cell: &Disc, lobes: u8, phase: f64) -> Vec<Disc> {
    let r = cell.r;
    let (lobe_r, ring) = match lobes {
        1 => (0.66 * r, 0.0),
        2 => (0.42 * r, 0.26 * r),
        3 => (0.36 * r, 0.30 * r),
        _ => (0.32 * r, 0.34 * r),
    };
    (0..lobes.max(1))
        .map(|k| {
            let a = phase + std::f64::consts::TAU * k as f64 / lobes.max(1) as f64;
            Disc {
                cx: cell.cx + ring * a.cos(),
                cy: cell.cy + ring * a.sin(),
                r: lobe_r,
            }
        })
        .collect()
}

/// Deterministic phantom for `(params, seed)`.
pub fn generate_phantom(params: &PhantomParams, seed: u64) -> Result<Phantom> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (params.width as f64, params.height as f64);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };

    let mut leukocytes: Vec<LeukocyteSpec> = Vec::new();
    let mut erythrocytes: Vec<Disc> = Vec::new();
    for _ in 0..params.leukocytes {
        let r = uniform(&mut rng, params.cell_radius);
        // Room for an adhering erythrocyte on any side.
        let margin = r + 2.0;
        if 2.0 * margin >= w || 2.0 * margin >= h {
            return Err(Error::Placement(format!("cell radius {r:.1} does not fit the image")));
        }
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cell = Disc {
                cx: rng.random_range(margin..w - margin),
                cy: rng.random_range(margin..h - margin),
                r,
            };
            if leukocytes
                .iter()
                .all(|l| l.cell.gap(&cell) > 3.0 * params.erythrocyte_radius.1)
            {
                placed = Some(cell);
                break;
            }
        }
        let cell = placed.ok_or_else(|| Error::Placement("no room for another leukocyte".into()))?;
        let n = rng.random_range(params.lobes.0..=params.lobes.1);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        leukocytes.push(LeukocyteSpec {
            cell,
            lobes: nucleus_lobes(&cell, n, phase),
        });
    }

    if params.adhesion > 0.0 {
        for l in &leukocytes {
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let r = uniform(&mut rng, params.erythrocyte_radius);
                let d = l.cell.r + r - 2.0 * r * params.adhesion;
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let disc = Disc {
                    cx: l.cell.cx + d * a.cos(),
                    cy: l.cell.cy + d * a.sin(),
                    r,
                };
                let inside = disc.cx - r >= 0.0 && disc.cy - r >= 0.0 && disc.cx + r < w && disc.cy + r < h;
                let clear = leukocytes.iter().all(|o| o == l || o.cell.gap(&disc) > 2.0)
                    && erythrocytes.iter().all(|e| e.gap(&disc) > 1.0);
                if inside && clear {
                    placed = Some(disc);
                    break;
                }
            }
            erythrocytes.push(placed.ok_or_else(|| Error::Placement("no room for an adhering erythrocyte".into()))?);
        }
    }

    // Free erythrocytes keep clear of leukocytes; ones that find no room are skipped.
    for _ in 0..params.erythrocytes {
        for _ in 0..PLACEMENT_ATTEMPTS / 10 {
            let r = uniform(&mut rng, params.erythrocyte_radius);
            if 2.0 * r >= w || 2.0 * r >= h {
                break;
            }
            let disc = Disc {
                cx: rng.random_range(r..w - r),
                cy: rng.random_range(r..h - r),
                r,
            };
            let clear =
                leukocytes.iter().all(|l| l.cell.gap(&disc) > 4.0) && erythrocytes.iter().all(|e| e.gap(&disc) > 1.0);
            if clear {
                erythrocytes.push(disc);
                break;
            }
        }
    }

    let (pw, ph) = (params.width, params.height);
    let gt_rbc = BinaryMask::from_fn(pw, ph, |x, y| erythrocytes.iter().any(|e| e.contains(x, y)));
    let gt_cell = BinaryMask::from_fn(pw, ph, |x, y| leukocytes.iter().any(|l| l.cell.contains(x, y)));
    let gt_nucleus = BinaryMask::from_fn(pw, ph, |x, y| {
        leukocytes.iter().any(|l| l.lobes.iter().any(|d| d.contains(x, y)))
    });

    let pal = &params.palette;
    let mut pixels = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        for x in 0..pw {
            let rgb = if gt_nucleus.get(x, y) {
                pal.nucleus
            } else if gt_cell.get(x, y) {
                pal.cytoplasm
            } else if let Some(e) = erythrocytes.iter().find(|e| e.contains(x, y)) {
                if in_disc(x, y, e.cx, e.cy, 0.45 * e.r) {
                    pal.pallor
                } else {
                    pal.erythrocyte
                }
            } else {
                pal.background
            };
            pixels.push(rgb);
        }
    }
    if params.noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, params.noise_sigma).map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
        for p in pixels.iter_mut() {
            for c in p.iter_mut() {
                *c = (*c as f64 + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(Phantom {
        image: RasterImage::new(pw, ph, pixels)?,
        gt_cell,
        gt_nucleus,
        gt_rbc,
        leukocytes,
        erythrocytes,
        seed,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::draw::rect_mask;
    use crate::imagecore::rgb_to_hsi;
    use crate::imagecore::ChannelImage;
    use crate::locator::{locate_nuclei, should_merge};

    #[test]
    fn identical_masks_score_perfectly() {
        let gt = rect_mask(20, 20, 5, 5, 14, 14);
        let r = evaluate(&gt, &gt).unwrap();
        assert_eq!(r.sa, 100.0);
        assert_eq!((r.or_rate, r.ur_rate, r.er_rate), (0.0, 0.0, 0.0));
    }

    #[test]
    fn under_and_over_segmentation_arithmetic() {
        let gt = rect_mask(20, 20, 0, 0, 9, 9);
        let mut under = gt.clone();
        for x in 2..7 {
            for y in 3..5 {
                under.set(x, y, false);
            }
        }
        let r = evaluate(&gt, &under).unwrap();
        assert_eq!((r.rs, r.os, r.us), (100, 0, 10));
        assert!((r.sa - 90.0).abs() < 1e-12 && (r.ur_rate - 0.1).abs() < 1e-12 && (r.er_rate - 0.1).abs() < 1e-12);

        let over = gt.union(&rect_mask(20, 20, 10, 0, 14, 4)).unwrap();
        let r = evaluate(&gt, &over).unwrap();
        assert_eq!(r.os, 25);
        assert!((r.or_rate - 0.2).abs() < 1e-12 && (r.sa - 75.0).abs() < 1e-12 && (r.er_rate - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_ground_truth_is_an_error() {
        let e = BinaryMask::empty(5, 5);
        assert!(evaluate(&e, &e).is_err());
    }

    #[test]
    fn summary_of_identical_reports_has_zero_spread() {
        let gt = rect_mask(10, 10, 2, 2, 7, 7);
        let r = evaluate(&gt, &gt).unwrap();
        let s = summarize(&[r, r, r]).unwrap();
        assert_eq!((s.sa_mean, s.sa_sd), (100.0, 0.0));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn phantom_is_deterministic() {
        let p = PhantomParams {
            noise_sigma: 8.0,
            adhesion: 0.3,
            ..PhantomParams::default()
        };
        let a = generate_phantom(&p, 11).unwrap();
        let b = generate_phantom(&p, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.image, generate_phantom(&p, 12).unwrap().image);
    }

    #[test]
    fn ground_truth_relations() {
        for seed in 0..10 {
            let p = PhantomParams {
                adhesion: 0.3,
                ..PhantomParams::default()
            };
            let ph = generate_phantom(&p, seed).unwrap();
            assert!(ph.gt_nucleus.difference(&ph.gt_cell).unwrap().is_empty());
            assert!(!ph.gt_cell.intersection(&ph.gt_rbc).unwrap().is_empty());
            let clean = generate_phantom(&PhantomParams::default(), seed).unwrap();
            assert!(clean.gt_cell.intersection(&clean.gt_rbc).unwrap().is_empty());
        }
    }

    fn mean_over(img: &ChannelImage, m: &BinaryMask) -> f64 {
        let v: Vec<f64> = m.foreground().map(|(x, y)| img.get(x, y) as f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn channel_orderings_hold() {
        let p = PhantomParams {
            noise_sigma: 8.0,
            ..PhantomParams::default()
        };
        let ph = generate_phantom(&p, 3).unwrap();
        let (hc, sc, _) = rgb_to_hsi(&ph.image);
        let g = ph.image.green();
        let cyto = ph.gt_cell.difference(&ph.gt_nucleus).unwrap();
        let bg = BinaryMask::from_fn(p.width, p.height, |x, y| !ph.gt_cell.get(x, y) && !ph.gt_rbc.get(x, y));
        assert!(mean_over(&g, &ph.gt_nucleus) < mean_over(&g, &cyto));
        assert!(mean_over(&g, &cyto) < mean_over(&g, &bg));
        for c in [&hc, &sc] {
            assert!(mean_over(c, &ph.gt_nucleus) > mean_over(c, &cyto));
            assert!(mean_over(c, &cyto) > mean_over(c, &bg));
        }
    }

    #[test]
    fn adhesion_grows_with_fraction() {
        let mut prev = 0;
        for a in [0.1, 0.2, 0.3, 0.4] {
            let p = PhantomParams {
                adhesion: a,
                erythrocytes: 0,
                erythrocyte_radius: (16.0, 16.0),
                cell_radius: (30.0, 30.0),
                ..PhantomParams::default()
            };
            let ph = generate_phantom(&p, 5).unwrap();
            let overlap = ph.gt_cell.intersection(&ph.gt_rbc).unwrap().count();
            assert!(overlap > prev, "{a}: {overlap} <= {prev}");
            prev = overlap;
        }
    }

    #[test]
    fn impossible_placement_is_an_error() {
        let p = PhantomParams {
            width: 40,
            height: 40,
            cell_radius: (30.0, 30.0),
            ..PhantomParams::default()
        };
        assert!(matches!(generate_phantom(&p, 1), Err(Error::Placement(_))));
        let crowded = PhantomParams {
            leukocytes: 40,
            ..PhantomParams::default()
        };
        assert!(matches!(generate_phantom(&crowded, 1), Err(Error::Placement(_))));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = PhantomParams {
            lobes: (0, 5),
            ..PhantomParams::default()
        };
        assert!(generate_phantom(&p, 1).is_err());
    }

    #[test]
    fn separate_lobes_with_merging_rectangles_form_one_roi() {
        // A C-shaped lobe wrapped around a round lobe.
        let ring = crate::imagecore::draw::disc_mask(100, 100, 50.0, 50.0, 20.0)
            .difference(&crate::imagecore::draw::disc_mask(100, 100, 50.0, 50.0, 13.0))
            .unwrap()
            .difference(&rect_mask(100, 100, 64, 45, 72, 55))
            .unwrap();
        let core = crate::imagecore::draw::disc_mask(100, 100, 50.0, 50.0, 9.0);
        let nucleus = ring.union(&core).unwrap();
        let comps = crate::imagecore::connected_components(&nucleus);
        assert_eq!(comps.len(), 2);
        // Hand check: ring box (30..=69, 30..=70), core box (41..=59, 41..=59);
        // the overlap is the core box, which holds both centres.
        assert_eq!(comps[0].bbox(), crate::imagecore::Roi::new(30, 30, 69, 70));
        assert_eq!(comps[1].bbox(), crate::imagecore::Roi::new(41, 41, 59, 59));
        assert!(should_merge(&comps[0].bbox(), &comps[1].bbox()));
        assert_eq!(locate_nuclei(&nucleus).len(), 1);
    }
}
