//! End-to-end segmentation: nucleus, localisation, per-channel cytoplasm
//! candidates, candidate scoring and the final decision.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::ccir::{ccir, CcirConfig};
use crate::error::{Error, Result};
use crate::imagecore::morphology::fill_holes;
use crate::imagecore::{
    apply_threshold, circularity, hsg_from_rgb, largest_component, rgb_to_hsi, trace_contour, BinaryMask, ChannelImage,
    HsgWeights, RasterImage, Roi,
};
use crate::ivfs::{final_threshold, ranges_from_levels, search_histogram, Channel, IvfsConfig, SearchRanges};
use crate::locator::{clean_nucleus_mask, locate_sites, CleanConfig, LeukocyteSite, RadiusThresholds};
use crate::swam::{nucleus_mask, swam_levels, swam_levels_with_polarity};

/// Threshold-search settings shared by the three channels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub delta: f64,
    /// Half width of the grey interval searched around each anchor level.
    pub half_width: u8,
    /// Build the search histogram only from pixels kept by the background threshold.
    pub exclude_background: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            delta: crate::ivfs::DEFAULT_DELTA,
            half_width: crate::ivfs::DEFAULT_SEARCH_HALF_WIDTH,
            exclude_background: true,
        }
    }
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub hsg: HsgWeights,
    /// Background threshold blend `T_u = alpha * T_b + beta * T_r`.
    pub alpha: f64,
    pub beta: f64,
    pub clean: CleanConfig,
    pub radius: RadiusThresholds,
    pub search: SearchConfig,
    pub ccir: CcirConfig,
    /// Fill holes of each channel's largest region before repair.
    pub fill_candidate_holes: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hsg: HsgWeights::default(),
            alpha: 0.7,
            beta: 0.3,
            clean: CleanConfig::default(),
            radius: RadiusThresholds::default(),
            search: SearchConfig::default(),
            ccir: CcirConfig::default(),
            fill_candidate_holes: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !((self.alpha + self.beta - 1.0).abs() < 1e-9
            && self.alpha > self.beta
            && unit(self.alpha)
            && unit(self.beta))
        {
            return Err(Error::Config(format!(
                "alpha ({}) and beta ({}) must lie in [0, 1], sum to 1 and satisfy alpha > beta",
                self.alpha, self.beta
            )));
        }
        let w = self.hsg;
        if !(unit(w.w1) && unit(w.w2) && unit(w.w3)) || w.w3 == 0.0 {
            return Err(Error::Config("HSG weights must lie in [0, 1] with w3 > 0".into()));
        }
        if !(self.search.delta > 0.0 && self.search.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0, 1)", self.search.delta)));
        }
        if self.radius.t1.partial_cmp(&self.radius.t2) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config("radius thresholds need t1 < t2".into()));
        }
        self.ccir.validate()
    }
}

/// Which threshold produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Provenance {
    /// Background-removal threshold `T_u`.
    Background,
    /// Fuzzy-divergence cytoplasm threshold `T_s`.
    Cytoplasm,
}

/// The four decision features and the combined value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecisionScore {
    pub cir_rato: f64,
    pub b_adh: f64,
    pub sgmv: f64,
    pub cir_sim: f64,
    pub dec: f64,
}

impl DecisionScore {
    pub fn new(cir_rato: f64, b_adh: f64, sgmv: f64, cir_sim: f64) -> Self {
        Self {
            cir_rato,
            b_adh,
            sgmv,
            cir_sim,
            dec: decision_value(cir_rato, b_adh, sgmv, cir_sim),
        }
    }
}

/// `1 / (3 - CirRato - Sgmv - CirSim + BAdh)`.
pub fn decision_value(cir_rato: f64, b_adh: f64, sgmv: f64, cir_sim: f64) -> f64 {
    1.0 / (3.0 - cir_rato - sgmv - cir_sim + b_adh)
}

/// One channel's cytoplasm candidate in site-crop coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMask {
    pub channel: Channel,
    pub mask: BinaryMask,
    pub provenance: Provenance,
    pub threshold: u8,
    pub circularity: f64,
    pub scores: Option<DecisionScore>,
}

/// Intermediate images of one site, kept when debugging is requested.
#[derive(Debug, Clone, PartialEq)]
pub struct DebugImage {
    /// `None` for whole-image stages.
    pub site: Option<usize>,
    pub stage: String,
    pub image: ChannelImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub site: LeukocyteSite,
    /// Full-image nucleus mask of this site.
    pub nucleus_mask: BinaryMask,
    /// Full-image mask of the winning candidate.
    pub cell_mask: BinaryMask,
    pub winning_channel: Channel,
    pub all_candidates: Vec<CandidateMask>,
}

impl SegmentationResult {
    pub fn winner(&self) -> &CandidateMask {
        self.all_candidates
            .iter()
            .find(|c| c.channel == self.winning_channel)
            .expect("winner is among the candidates")
    }
}

/// A site that produced no candidate.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SiteFailure {
    pub site: usize,
    pub roi: Roi,
    pub reason: String,
}

/// Everything one image produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub nucleus_mask: BinaryMask,
    pub results: Vec<SegmentationResult>,
    pub failures: Vec<SiteFailure>,
    pub debug: Vec<DebugImage>,
}

impl Segmentation {
    /// Union of all cell masks.
    pub fn cell_union(&self) -> BinaryMask {
        let (w, h) = self.nucleus_mask.dims();
        let mut out = BinaryMask::empty(w, h);
        for r in &self.results {
            for (x, y) in r.cell_mask.foreground() {
                out.set(x, y, true);
            }
        }
        out
    }
}

/// Cleaned nucleus mask and one site per located nucleus.
pub fn segment_nucleus(img: &RasterImage, config: &PipelineConfig) -> Result<(BinaryMask, Vec<LeukocyteSite>)> {
    let hsg = hsg_from_rgb(img, &config.hsg);
    nucleus_from_hsg(&hsg, config)
}

fn nucleus_from_hsg(hsg: &ChannelImage, config: &PipelineConfig) -> Result<(BinaryMask, Vec<LeukocyteSite>)> {
    let (w, h) = hsg.dims();
    let levels = match swam_levels(hsg) {
        Ok(l) => l,
        // A featureless image has no nuclei.
        Err(Error::DegenerateImage(_)) => return Ok((BinaryMask::empty(w, h), Vec::new())),
        Err(e) => return Err(e),
    };
    let clean = clean_nucleus_mask(&nucleus_mask(hsg, &levels), &config.clean);
    let sites = locate_sites(&clean, &config.radius)?;
    Ok((clean, sites))
}

/// G, H and S images of a crop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub g: ChannelImage,
    pub h: ChannelImage,
    pub s: ChannelImage,
}

impl ChannelSet {
    pub fn from_rgb(img: &RasterImage) -> Self {
        let (h, s, _) = rgb_to_hsi(img);
        Self { g: img.green(), h, s }
    }

    pub fn get(&self, channel: Channel) -> &ChannelImage {
        match channel {
            Channel::G => &self.g,
            Channel::H => &self.h,
            Channel::S => &self.s,
        }
    }

    fn crop(&self, roi: &Roi) -> Self {
        Self {
            g: self.g.crop(roi),
            h: self.h.crop(roi),
            s: self.s.crop(roi),
        }
    }
}

/// Intermediate masks of one channel, for debugging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTrace {
    pub background_mask: Option<BinaryMask>,
    pub cytoplasm_mask: Option<BinaryMask>,
    pub background_region: Option<BinaryMask>,
    pub cytoplasm_region: Option<BinaryMask>,
}

/// Candidate of one channel, or `None` when both thresholded images are empty
/// or the channel is flat.
pub fn channel_candidate(
    sub: &ChannelImage,
    channel: Channel,
    nucleus_sub: &BinaryMask,
    config: &PipelineConfig,
) -> Result<Option<CandidateMask>> {
    Ok(channel_candidate_traced(sub, channel, nucleus_sub, config)?.0)
}

pub fn channel_candidate_traced(
    sub: &ChannelImage,
    channel: Channel,
    nucleus_sub: &BinaryMask,
    config: &PipelineConfig,
) -> Result<(Option<CandidateMask>, ChannelTrace)> {
    let mut trace = ChannelTrace::default();
    let polarity = channel.polarity();
    let levels = match swam_levels_with_polarity(sub, polarity) {
        Ok(l) => l,
        Err(Error::DegenerateImage(_)) => return Ok((None, trace)),
        Err(e) => return Err(e),
    };
    let keep = polarity.keep();
    let t_u = (config.alpha * levels.background as f64 + config.beta * levels.erythrocyte as f64)
        .round()
        .clamp(0.0, 255.0) as u8;
    let i1 = apply_threshold(sub, t_u, keep);

    let region = if config.search.exclude_background && !i1.is_empty() {
        Some(&i1)
    } else {
        None
    };
    let t_s = cytoplasm_threshold(sub, region, channel, &levels, config);
    let i2 = t_s.map(|t| apply_threshold(sub, t, keep));

    let origin = nucleus_sub_centroid(nucleus_sub);
    let mut best: Option<CandidateMask> = None;
    let mut consider =
        |mask: &BinaryMask, provenance: Provenance, threshold: u8, trace_slot: &mut Option<BinaryMask>| -> Result<()> {
            let Some(comp) = largest_component(mask) else {
                return Ok(());
            };
            let (w, h) = mask.dims();
            let mut region = comp.to_mask(w, h);
            if config.fill_candidate_holes {
                region = fill_holes(&region);
            }
            let repaired = ccir(&region, origin.unwrap_or_else(|| comp.centroid()), &config.ccir)?;
            *trace_slot = Some(repaired.clone());
            let Some(rc) = largest_component(&repaired) else {
                return Ok(());
            };
            let circ = rc.stats().circularity;
            if best.as_ref().is_none_or(|b| circ > b.circularity) {
                best = Some(CandidateMask {
                    channel,
                    mask: repaired,
                    provenance,
                    threshold,
                    circularity: circ,
                    scores: None,
                });
            }
            Ok(())
        };
    consider(&i1, Provenance::Background, t_u, &mut trace.background_region)?;
    if let (Some(i2), Some(t)) = (&i2, t_s) {
        consider(i2, Provenance::Cytoplasm, t, &mut trace.cytoplasm_region)?;
    }
    trace.background_mask = Some(i1);
    trace.cytoplasm_mask = i2;
    Ok((best, trace))
}

fn cytoplasm_threshold(
    sub: &ChannelImage,
    region: Option<&BinaryMask>,
    channel: Channel,
    levels: &crate::swam::SwamLevels,
    config: &PipelineConfig,
) -> Option<u8> {
    let n = channel.n_classes();
    let ranges = ranges_from_levels(levels, n, config.search.half_width).ok()?;
    let ivfs = IvfsConfig {
        delta: config.search.delta,
        n_classes: n,
        search: SearchRanges::Explicit(ranges),
    };
    let hist = crate::imagecore::histogram(sub, region).ok()?;
    let result = search_histogram(&hist, &ivfs).ok()?;
    final_threshold(&result, channel).ok()
}

fn nucleus_sub_centroid(m: &BinaryMask) -> Option<(f64, f64)> {
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for (x, y) in m.foreground() {
        n += 1;
        sx += x as f64;
        sy += y as f64;
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

/// Circularity of a mask treated as one object: pixel count against the
/// summed chain-length perimeters of its components.
pub fn mask_circularity(mask: &BinaryMask) -> f64 {
    let comps = crate::imagecore::connected_components(mask);
    let area: usize = comps.iter().map(|c| c.area()).sum();
    let perimeter: f64 = comps.iter().map(|c| trace_contour(c).perimeter()).sum();
    if area == 0 {
        return 0.0;
    }
    circularity(area, perimeter)
}

/// Share of each image border covered by the mask, averaged over the borders
/// it touches; zero when it touches none.
pub fn border_adhesion(mask: &BinaryMask) -> f64 {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return 0.0;
    }
    let up = (0..w).filter(|&x| mask.get(x, 0)).count();
    let dn = (0..w).filter(|&x| mask.get(x, h - 1)).count();
    let lt = (0..h).filter(|&y| mask.get(0, y)).count();
    let rt = (0..h).filter(|&y| mask.get(w - 1, y)).count();
    let acc = [up, dn, lt, rt].iter().filter(|&&c| c > 0).count();
    if acc == 0 {
        return 0.0;
    }
    (((up + dn) as f64 / w as f64 + (lt + rt) as f64 / h as f64) / acc as f64).clamp(0.0, 1.0)
}

/// Mean saturation over mask pixels outside the nucleus, scaled to `[0, 1]`.
pub fn saturation_mean(mask: &BinaryMask, s: &ChannelImage, nucleus: &BinaryMask) -> f64 {
    let (mut n, mut sum) = (0u64, 0u64);
    for (x, y) in mask.foreground() {
        if !nucleus.get(x, y) {
            n += 1;
            sum += s.get(x, y) as u64;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64 / 255.0
    }
}

/// Conic `a x^2 + b xy + c y^2 + d x + e y + f = 0` in normalised coordinates
/// `((x - mx) / scale, (y - my) / scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    coeffs: [f64; 6],
    mx: f64,
    my: f64,
    scale: f64,
    interior_sign: f64,
}

impl Ellipse {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let (u, v) = ((x - self.mx) / self.scale, (y - self.my) / self.scale);
        let [a, b, c, d, e, f] = self.coeffs;
        a * u * u + b * u * v + c * v * v + d * u + e * v + f
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.eval(x, y) * self.interior_sign >= 0.0
    }

    /// Axis-aligned ellipse inscribed in a rectangle.
    pub fn inscribed(roi: &Roi) -> Self {
        let (cx, cy) = roi.center();
        let a = roi.width() as f64 / 2.0;
        let b = roi.height() as f64 / 2.0;
        // (u/a)^2 + (v/b)^2 - 1 with unit scale about the centre.
        Self {
            coeffs: [1.0 / (a * a), 0.0, 1.0 / (b * b), 0.0, 0.0, -1.0],
            mx: cx,
            my: cy,
            scale: 1.0,
            interior_sign: -1.0,
        }
    }

    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }
}

/// Direct least-squares ellipse fit constrained to `4ac - b^2 > 0`.
/// `None` for fewer than five points or a degenerate configuration.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Option<Ellipse> {
    if points.len() < 5 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let scale = (points
        .iter()
        .map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if scale <= f64::EPSILON {
        return None;
    }
    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for &(x, y) in points {
        let (u, v) = ((x - mx) / scale, (y - my) / scale);
        let d1 = Vector3::new(u * u, u * v, v * v);
        let d2 = Vector3::new(u, v, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let t = -s3.try_inverse()? * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint matrix.
    let m = Matrix3::from_rows(&[m.row(2) / 2.0, -m.row(1), m.row(0) / 2.0]);
    let mut best: Option<Vector3<f64>> = None;
    for lambda in m.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * lambda.re.abs().max(1.0) {
            continue;
        }
        let shifted = m - Matrix3::identity() * lambda.re;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t?;
        let k = svd.singular_values.imin();
        let v: Vector3<f64> = v_t.row(k).transpose();
        if 4.0 * v[0] * v[2] - v[1] * v[1] > 0.0 {
            best = Some(v);
        }
    }
    let a1 = best?;
    let a2 = t * a1;
    let coeffs = [a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return None;
    }
    // Centre where the gradient vanishes.
    let det = 4.0 * coeffs[0] * coeffs[2] - coeffs[1] * coeffs[1];
    let cu = (coeffs[1] * coeffs[4] - 2.0 * coeffs[2] * coeffs[3]) / det;
    let cv = (coeffs[1] * coeffs[3] - 2.0 * coeffs[0] * coeffs[4]) / det;
    let mut e = Ellipse {
        coeffs,
        mx,
        my,
        scale,
        interior_sign: 1.0,
    };
    let at_centre = e.eval(mx + cu * scale, my + cv * scale);
    if at_centre == 0.0 || !at_centre.is_finite() {
        return None;
    }
    e.interior_sign = at_centre.signum();
    Some(e)
}

/// Foreground pixels with a background (or out-of-image) 4-neighbour.
pub fn boundary_points(mask: &BinaryMask) -> Vec<(f64, f64)> {
    mask.foreground()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| !mask.get_signed(x + dx, y + dy))
        })
        .map(|(x, y)| (x as f64, y as f64))
        .collect()
}

/// Ellipse fitted to the union of the candidate masks, rasterised.
pub fn reference_ellipse(union: &BinaryMask) -> BinaryMask {
    let (w, h) = union.dims();
    match fit_ellipse(&boundary_points(union)) {
        Some(e) => e.rasterize(w, h),
        None => {
            let bbox = bounding_roi(union).unwrap_or(Roi::new(0, 0, w.saturating_sub(1), h.saturating_sub(1)));
            Ellipse::inscribed(&bbox).rasterize(w, h)
        }
    }
}

fn bounding_roi(mask: &BinaryMask) -> Option<Roi> {
    let mut it = mask.foreground();
    let (x0, y0) = it.next()?;
    let mut r = Roi::new(x0, y0, x0, y0);
    for (x, y) in it {
        r = r.union(&Roi::new(x, y, x, y));
    }
    Some(r)
}

/// `1 - (|mask \ E| + |E \ mask|) / |E|`, clamped to `[0, 1]`.
pub fn ellipse_similarity(mask: &BinaryMask, ellipse: &BinaryMask) -> Result<f64> {
    let ref_a = ellipse.count();
    if ref_a == 0 {
        return Ok(0.0);
    }
    let out_a = mask.difference(ellipse)?.count();
    let in_a = ellipse.difference(mask)?.count();
    Ok((1.0 - (out_a + in_a) as f64 / ref_a as f64).clamp(0.0, 1.0))
}

/// Scores every candidate against the ellipse fitted to their union.
pub fn score_candidates(
    candidates: &[CandidateMask],
    s: &ChannelImage,
    nucleus_sub: &BinaryMask,
) -> Result<Vec<DecisionScore>> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::InvalidParameter("no candidates to score".into()))?;
    let mut union = first.mask.clone();
    for c in &candidates[1..] {
        union = union.union(&c.mask)?;
    }
    let ellipse = reference_ellipse(&union);
    candidates
        .iter()
        .map(|c| {
            Ok(DecisionScore::new(
                mask_circularity(&c.mask),
                border_adhesion(&c.mask),
                saturation_mean(&c.mask, s, nucleus_sub),
                ellipse_similarity(&c.mask, &ellipse)?,
            ))
        })
        .collect()
}

/// Index of the highest decision value; ties go to the earlier entry, so
/// candidates listed in G, H, S order prefer that order.
pub fn decide(scores: &[DecisionScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s.dec > scores[b].dec) {
            best = Some(i);
        }
    }
    best
}

/// Segments every leukocyte in the image.
pub fn segment(img: &RasterImage, config: &PipelineConfig) -> Result<Segmentation> {
    segment_with_debug(img, config, false)
}

pub fn segment_with_debug(img: &RasterImage, config: &PipelineConfig, debug: bool) -> Result<Segmentation> {
    config.validate()?;
    let hsg = hsg_from_rgb(img, &config.hsg);
    let (nucleus, sites) = nucleus_from_hsg(&hsg, config)?;
    let channels = ChannelSet::from_rgb(img);
    let outcomes: Vec<Result<SiteOutcome>> = sites
        .par_iter()
        .enumerate()
        .map(|(i, site)| segment_site(i, site, &channels, img.dims(), config, debug))
        .collect();
    let mut out = Segmentation {
        nucleus_mask: nucleus.clone(),
        results: Vec::new(),
        failures: Vec::new(),
        debug: Vec::new(),
    };
    if debug {
        out.debug.push(DebugImage {
            site: None,
            stage: "hsg".into(),
            image: hsg,
        });
        out.debug.push(DebugImage {
            site: None,
            stage: "nucleus".into(),
            image: nucleus.to_channel(),
        });
    }
    for o in outcomes {
        let (result, dbg) = o?;
        match result {
            Ok(r) => out.results.push(r),
            Err(f) => out.failures.push(f),
        }
        out.debug.extend(dbg);
    }
    Ok(out)
}

type SiteOutcome = (std::result::Result<SegmentationResult, SiteFailure>, Vec<DebugImage>);

fn segment_site(
    index: usize,
    site: &LeukocyteSite,
    channels: &ChannelSet,
    dims: (usize, usize),
    config: &PipelineConfig,
    debug: bool,
) -> Result<SiteOutcome> {
    let roi = site.combined_roi;
    let sub = channels.crop(&roi);
    let nucleus_full = site.nucleus_mask(dims.0, dims.1);
    let nucleus_sub = nucleus_full.crop(&roi);
    let mut dbg = Vec::new();
    let mut push = |stage: String, image: ChannelImage| {
        if debug {
            dbg.push(DebugImage {
                site: Some(index),
                stage,
                image,
            });
        }
    };
    let mut candidates = Vec::new();
    for channel in Channel::ALL {
        let (cand, trace) = channel_candidate_traced(sub.get(channel), channel, &nucleus_sub, config)?;
        push(format!("{channel}"), sub.get(channel).clone());
        for (name, m) in [
            ("i1", &trace.background_mask),
            ("i2", &trace.cytoplasm_mask),
            ("m1", &trace.background_region),
            ("m2", &trace.cytoplasm_region),
        ] {
            if let Some(m) = m {
                push(format!("{channel}_{name}"), m.to_channel());
            }
        }
        if let Some(c) = cand {
            push(format!("{channel}_candidate"), c.mask.to_channel());
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        let failure = SiteFailure {
            site: index,
            roi,
            reason: "no channel produced a candidate".into(),
        };
        return Ok((Err(failure), dbg));
    }
    let scores = score_candidates(&candidates, &sub.s, &nucleus_sub)?;
    for (c, s) in candidates.iter_mut().zip(&scores) {
        c.scores = Some(*s);
    }
    let win = decide(&scores).expect("non-empty scores");
    let winner = &candidates[win];
    let cell_mask = winner.mask.paste_into(dims.0, dims.1, roi.x1, roi.y1);
    push("winner".into(), winner.mask.to_channel());
    Ok((
        Ok(SegmentationResult {
            site: site.clone(),
            nucleus_mask: nucleus_full,
            cell_mask,
            winning_channel: winner.channel,
            all_candidates: candidates,
        }),
        dbg,
    ))
}
