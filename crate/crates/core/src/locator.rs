//! Nucleus mask clean-up and leukocyte region-of-interest localisation.

use crate::error::{Error, Result};
use crate::imagecore::components::union_stats;
use crate::imagecore::morphology::{fill_holes, open, remove_small_components, Kernel};
use crate::imagecore::{connected_components, BinaryMask, Component, ShapeStats};

pub use crate::imagecore::Roi;

/// Speckle removal parameters for the raw nucleus mask.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanConfig {
    /// Absolute area floor in pixels.
    pub min_area: usize,
    /// Area floor relative to the largest component.
    pub min_fraction_of_largest: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            min_area: 50,
            min_fraction_of_largest: 0.01,
        }
    }
}

/// Circularity breakpoints of the cytoplasm radius rule.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusThresholds {
    pub t1: f64,
    pub t2: f64,
}

impl Default for RadiusThresholds {
    fn default() -> Self {
        Self { t1: 0.46, t2: 0.85 }
    }
}

/// Opening with a 3x3 cross, removal of small components, hole filling.
pub fn clean_nucleus_mask(mask: &BinaryMask, config: &CleanConfig) -> BinaryMask {
    let opened = open(mask, Kernel::Cross);
    let largest = connected_components(&opened)
        .iter()
        .map(Component::area)
        .max()
        .unwrap_or(0);
    let floor = config
        .min_area
        .max((largest as f64 * config.min_fraction_of_largest).ceil() as usize);
    fill_holes(&remove_small_components(&opened, floor))
}

/// A nucleus rectangle and the components merged into it.
#[derive(Debug, Clone, PartialEq)]
pub struct NucleusRoi {
    pub roi: Roi,
    pub components: Vec<Component>,
}

impl NucleusRoi {
    pub fn stats(&self) -> ShapeStats {
        let refs: Vec<&Component> = self.components.iter().collect();
        union_stats(&refs)
    }
}

/// True when the rectangles overlap and both centres lie in the overlap.
pub fn should_merge(a: &Roi, b: &Roi) -> bool {
    let Some(overlap) = a.intersection(b) else {
        return false;
    };
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    overlap.contains_point(ax, ay) && overlap.contains_point(bx, by)
}

/// Bounding rectangles of the nucleus components, merged until no pair
/// satisfies [`should_merge`].
pub fn locate_nuclei(mask: &BinaryMask) -> Vec<NucleusRoi> {
    merge_components(connected_components(mask))
}

/// Merges components; the result does not depend on the input order.
pub fn merge_components(mut components: Vec<Component>) -> Vec<NucleusRoi> {
    components.sort_by_key(|c| {
        let (x, y) = c.pixels()[0];
        (y, x)
    });
    let mut rois: Vec<NucleusRoi> = components
        .into_iter()
        .map(|c| NucleusRoi {
            roi: c.bbox(),
            components: vec![c],
        })
        .collect();
    'outer: loop {
        for i in 0..rois.len() {
            for j in i + 1..rois.len() {
                if should_merge(&rois[i].roi, &rois[j].roi) {
                    let other = rois.remove(j);
                    rois[i].roi = rois[i].roi.union(&other.roi);
                    rois[i].components.extend(other.components);
                    continue 'outer;
                }
            }
        }
        break;
    }
    rois
}

/// Cytoplasm radius multiplier for a nucleus circularity: 2.6, 2.3 or 1.6.
/// Intervals are left-closed, so a value equal to a breakpoint takes the
/// smaller multiplier.
pub fn radius_multiplier(circularity: f64, t: &RadiusThresholds) -> f64 {
    if circularity < t.t1 {
        2.6
    } else if circularity < t.t2 {
        2.3
    } else {
        1.6
    }
}

/// Equivalent radius of the cell from the nucleus circularity and its reference radius.
pub fn equivalent_radius(circularity: f64, radius: f64, t: &RadiusThresholds) -> f64 {
    radius_multiplier(circularity, t) * radius
}

/// `R_e` from nucleus statistics, with `R = sqrt(S / pi)`.
pub fn cytoplasm_radius(stats: &ShapeStats, t: &RadiusThresholds) -> Result<f64> {
    if stats.area == 0 {
        return Err(Error::InvalidParameter("nucleus area is zero".into()));
    }
    let r = (stats.area as f64 / std::f64::consts::PI).sqrt();
    Ok(equivalent_radius(stats.circularity, r, t))
}

/// One located leukocyte.
#[derive(Debug, Clone, PartialEq)]
pub struct LeukocyteSite {
    pub nucleus_roi: Roi,
    pub cytoplasm_roi: Roi,
    pub combined_roi: Roi,
    pub nucleus_components: Vec<Component>,
    pub nucleus_stats: ShapeStats,
    pub equivalent_radius: f64,
}

impl LeukocyteSite {
    /// Nucleus pixels as a full-image mask.
    pub fn nucleus_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(width, height);
        for c in &self.nucleus_components {
            for &(x, y) in c.pixels() {
                m.set(x, y, true);
            }
        }
        m
    }
}

/// Square of half-side `radius` about `center`, clamped to the image.
pub fn square_roi(center: (f64, f64), radius: f64, dims: (usize, usize)) -> Roi {
    let clamp = |v: f64, max: usize| v.round().clamp(0.0, (max - 1) as f64) as usize;
    Roi::new(
        clamp(center.0 - radius, dims.0),
        clamp(center.1 - radius, dims.1),
        clamp(center.0 + radius, dims.0),
        clamp(center.1 + radius, dims.1),
    )
}

/// Cytoplasm rectangle around the nucleus centroid and the combined region.
pub fn locate_site(nucleus: &NucleusRoi, dims: (usize, usize), t: &RadiusThresholds) -> Result<LeukocyteSite> {
    let stats = nucleus.stats();
    let re = cytoplasm_radius(&stats, t)?;
    let cytoplasm_roi = square_roi(stats.centroid, re, dims);
    Ok(LeukocyteSite {
        nucleus_roi: nucleus.roi,
        cytoplasm_roi,
        combined_roi: nucleus.roi.union(&cytoplasm_roi),
        nucleus_components: nucleus.components.clone(),
        nucleus_stats: stats,
        equivalent_radius: re,
    })
}

/// Clean mask in, sites out.
pub fn locate_sites(clean_mask: &BinaryMask, t: &RadiusThresholds) -> Result<Vec<LeukocyteSite>> {
    locate_nuclei(clean_mask)
        .iter()
        .map(|n| locate_site(n, clean_mask.dims(), t))
        .collect()
}
