//! Multilevel threshold selection with interval-valued fuzzy sets.
//!
//! For a candidate tuple of thresholds the histogram is split into regions,
//! every pixel gets a Cauchy-type membership to the mean of its region, the
//! membership is widened to the interval `[mu^(1/delta), mu^delta]` and folded
//! back with the probabilistic sum, and the exponential fuzzy divergence to
//! the all-ones (ideal) image is accumulated. The tuple with the smallest
//! divergence wins; ties go to the lexicographically smallest tuple.

use crate::error::{Error, Result};
use crate::imagecore::{histogram, BinaryMask, ChannelImage, Histogram};
use crate::swam::{ChannelPolarity, SwamLevels};

/// Colour channel a cytoplasm candidate is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Channel {
    G,
    H,
    S,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::G, Channel::H, Channel::S];

    /// Number of classes searched for this channel.
    pub fn n_classes(self) -> usize {
        match self {
            Channel::G => 4,
            Channel::H => 3,
            Channel::S => 2,
        }
    }

    /// Nucleus is darkest in G and brightest in H and S.
    pub fn polarity(self) -> ChannelPolarity {
        match self {
            Channel::G => ChannelPolarity::Descending,
            Channel::H | Channel::S => ChannelPolarity::Ascending,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::G => "G",
            Channel::H => "H",
            Channel::S => "S",
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive grey-level interval searched for each threshold.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SearchRanges {
    /// Every interior threshold `1..=254`.
    Full,
    Explicit(Vec<(u8, u8)>),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IvfsConfig {
    /// Interval exponent in `(0, 1)`.
    pub delta: f64,
    pub n_classes: usize,
    pub search: SearchRanges,
}

impl IvfsConfig {
    pub fn full_range(n_classes: usize) -> Self {
        Self {
            delta: DEFAULT_DELTA,
            n_classes,
            search: SearchRanges::Full,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(2..=4).contains(&self.n_classes) {
            return Err(Error::InvalidParameter(format!(
                "n_classes {} not in 2..=4",
                self.n_classes
            )));
        }
        if let SearchRanges::Explicit(r) = &self.search {
            if r.len() != self.n_classes - 1 {
                return Err(Error::InvalidParameter(format!(
                    "{} search ranges for {} classes",
                    r.len(),
                    self.n_classes
                )));
            }
        }
        Ok(())
    }

    fn ranges(&self) -> Vec<(u8, u8)> {
        match &self.search {
            SearchRanges::Full => vec![(1, 254); self.n_classes - 1],
            SearchRanges::Explicit(r) => r.clone(),
        }
    }
}

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_SEARCH_HALF_WIDTH: u8 = 25;

/// Per-pixel membership values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl MembershipMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "membership map has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("membership {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![1.0; width * height],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Selected thresholds with their divergence and region means.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdResult {
    pub thresholds: Vec<u8>,
    pub divergence: f64,
    pub region_means: Vec<f64>,
}

/// Region bounds `[t_{c-1}, t_c)` with the last region closed at 255.
fn region_bounds(thresholds: &[u8]) -> Vec<(usize, usize)> {
    let mut bounds = Vec::with_capacity(thresholds.len() + 1);
    let mut lo = 0usize;
    for &t in thresholds {
        bounds.push((lo, t as usize));
        lo = t as usize;
    }
    bounds.push((lo, 256));
    bounds
}

/// Mean grey value of each region; an empty region reports its midpoint.
pub fn region_means(hist: &Histogram, thresholds: &[u8]) -> Vec<f64> {
    let counts = hist.counts();
    region_bounds(thresholds)
        .into_iter()
        .map(|(lo, hi)| {
            let (n, s) = bin_sums(counts, lo, hi);
            if n == 0 {
                (lo + hi.min(255)) as f64 / 2.0
            } else {
                s as f64 / n as f64
            }
        })
        .collect()
}

/// Count and grey-weighted sum over bins `lo..hi`.
fn bin_sums(counts: &[u64; 256], lo: usize, hi: usize) -> (u64, u64) {
    counts[lo..hi]
        .iter()
        .enumerate()
        .fold((0, 0), |(n, s), (i, &c)| (n + c, s + (lo + i) as u64 * c))
}

/// Cauchy-type membership `1 / (1 + |f - avg| / (f_max - f_min))`.
pub fn membership(f: u8, avg: f64, f_min: u8, f_max: u8) -> Result<f64> {
    if f_max <= f_min {
        return Err(Error::DegenerateImage(format!(
            "grey range is empty (f_min {f_min}, f_max {f_max})"
        )));
    }
    Ok(cauchy(f as f64, avg, 1.0 / (f_max - f_min) as f64))
}

#[inline]
fn cauchy(f: f64, avg: f64, c: f64) -> f64 {
    1.0 / (1.0 + c * (f - avg).abs())
}

/// Probabilistic sum of the interval bounds `mu^(1/delta)` and `mu^delta`.
pub fn interval_membership(mu: f64, delta: f64) -> f64 {
    let lower = mu.powf(1.0 / delta);
    let upper = mu.powf(delta);
    lower + upper - lower * upper
}

#[inline]
fn divergence_term(a: f64, b: f64) -> f64 {
    let d = a - b;
    (2.0 - (1.0 - d) * d.exp() - (1.0 + d) * (-d).exp()).max(0.0)
}

#[inline]
fn ideal_term(mu: f64) -> f64 {
    (2.0 - (2.0 - mu) * (mu - 1.0).exp() - mu * (1.0 - mu).exp()).max(0.0)
}

/// Exponential fuzzy divergence between two membership maps.
pub fn fuzzy_divergence(a: &MembershipMap, b: &MembershipMap) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| divergence_term(x, y))
        .sum())
}

/// Divergence to the ideal thresholded image, whose memberships are all one.
pub fn divergence_to_ideal(a: &MembershipMap) -> f64 {
    a.values.iter().map(|&m| ideal_term(m)).sum()
}

/// Membership map of an image for a given threshold tuple.
pub fn membership_map(img: &ChannelImage, thresholds: &[u8], delta: f64) -> Result<MembershipMap> {
    let hist = histogram(img, None)?;
    let (f_min, f_max) = hist
        .range()
        .ok_or_else(|| Error::DegenerateImage("empty image".into()))?;
    let means = region_means(&hist, thresholds);
    let bounds = region_bounds(thresholds);
    let values = img
        .values()
        .iter()
        .map(|&f| {
            let c = bounds
                .iter()
                .position(|&(lo, hi)| (f as usize) >= lo && (f as usize) < hi)
                .unwrap();
            membership(f, means[c], f_min, f_max).map(|mu| interval_membership(mu, delta))
        })
        .collect::<Result<Vec<_>>>()?;
    MembershipMap::new(img.width(), img.height(), values)
}

/// Exhaustive arg-min search over the whole image.
pub fn search_thresholds(img: &ChannelImage, config: &IvfsConfig) -> Result<ThresholdResult> {
    search_histogram(&histogram(img, None)?, config)
}

/// Search restricted to pixels under `region`.
pub fn search_thresholds_masked(
    img: &ChannelImage,
    region: &BinaryMask,
    config: &IvfsConfig,
) -> Result<ThresholdResult> {
    search_histogram(&histogram(img, Some(region))?, config)
}

/// Search on a histogram; the divergence only depends on grey-level counts.
pub fn search_histogram(hist: &Histogram, config: &IvfsConfig) -> Result<ThresholdResult> {
    config.validate()?;
    let (f_min, f_max) = hist
        .range()
        .ok_or_else(|| Error::DegenerateImage("no pixels to threshold".into()))?;
    if f_min == f_max {
        return Err(Error::DegenerateImage(format!("constant grey level {f_min}")));
    }
    let ranges = config.ranges();
    for (k, &(lo, hi)) in ranges.iter().enumerate() {
        if lo > hi || lo == 0 {
            return Err(Error::EmptySearchRange { index: k });
        }
    }

    let table = CostTable::new(hist, &ranges, f_min, f_max, config.delta);
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut tuple = vec![0u8; ranges.len()];
    enumerate(&ranges, 0, 0, &mut tuple, &mut |t| {
        let d = table.divergence(t);
        // Strict comparison keeps the first (lexicographically smallest) minimum.
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, t.to_vec()));
        }
    });
    let (divergence, thresholds) = best.ok_or(Error::EmptySearchRange {
        index: ranges.len() - 1,
    })?;
    let region_means = region_means(hist, &thresholds);
    Ok(ThresholdResult {
        thresholds,
        divergence,
        region_means,
    })
}

/// Visits strictly increasing tuples in lexicographic order.
fn enumerate(ranges: &[(u8, u8)], k: usize, min: u16, tuple: &mut Vec<u8>, visit: &mut impl FnMut(&[u8])) {
    if k == ranges.len() {
        visit(tuple);
        return;
    }
    let (lo, hi) = ranges[k];
    let start = (lo as u16).max(min);
    for t in start..=hi as u16 {
        tuple[k] = t as u8;
        enumerate(ranges, k + 1, t + 1, tuple, visit);
    }
}

/// Divergence contribution of every region `[lo, hi)` that a tuple in the
/// search ranges can produce.
struct CostTable {
    cost: Vec<f64>,
}

impl CostTable {
    const STRIDE: usize = 257;

    fn new(hist: &Histogram, ranges: &[(u8, u8)], f_min: u8, f_max: u8, delta: f64) -> Self {
        let counts = hist.counts();
        let c = 1.0 / (f_max - f_min) as f64;
        let mut starts = vec![false; 256];
        let mut ends = vec![false; 257];
        starts[0] = true;
        ends[256] = true;
        for &(lo, hi) in ranges {
            for t in lo as usize..=hi as usize {
                starts[t] = true;
                ends[t] = true;
            }
        }
        let mut cost = vec![f64::NAN; 256 * Self::STRIDE];
        for lo in (0..256).filter(|&l| starts[l]) {
            for hi in (lo + 1..=256).filter(|&h| ends[h]) {
                let (n, s) = bin_sums(counts, lo, hi);
                let value = if n == 0 {
                    0.0
                } else {
                    let avg = s as f64 / n as f64;
                    (lo..hi)
                        .filter(|&f| counts[f] > 0)
                        .map(|f| {
                            let mu = interval_membership(cauchy(f as f64, avg, c), delta);
                            counts[f] as f64 * ideal_term(mu)
                        })
                        .sum()
                };
                cost[lo * Self::STRIDE + hi] = value;
            }
        }
        Self { cost }
    }

    fn divergence(&self, thresholds: &[u8]) -> f64 {
        let mut lo = 0usize;
        let mut d = 0.0;
        for &t in thresholds {
            d += self.cost[lo * Self::STRIDE + t as usize];
            lo = t as usize;
        }
        d + self.cost[lo * Self::STRIDE + 256]
    }
}

/// Search ranges centred on the midpoints between adjacent characteristic
/// levels.
pub fn ranges_from_levels(levels: &SwamLevels, n_classes: usize, half_width: u8) -> Result<Vec<(u8, u8)>> {
    if !(2..=4).contains(&n_classes) {
        return Err(Error::InvalidParameter(format!("n_classes {n_classes} not in 2..=4")));
    }
    let l = levels.ascending();
    let mids: Vec<u16> = l.windows(2).map(|w| (w[0] as u16 + w[1] as u16).div_ceil(2)).collect();
    // The erythrocyte/cytoplasm midpoint is always searched; extra thresholds
    // extend towards the nucleus end first.
    let picks: &[usize] = match (levels.polarity, n_classes) {
        (_, 2) => &[1],
        (ChannelPolarity::Ascending, 3) => &[1, 2],
        (ChannelPolarity::Descending, 3) => &[0, 1],
        _ => &[0, 1, 2],
    };
    let anchors: Vec<u16> = picks.iter().map(|&i| mids[i]).collect();
    let hw = half_width as u16;
    let mut ranges: Vec<(u16, u16)> = anchors
        .iter()
        .map(|&m| (m.saturating_sub(hw).max(1), (m + hw).min(254)))
        .collect();
    // Keep room for a strictly increasing tuple.
    for i in 1..ranges.len() {
        ranges[i].0 = ranges[i].0.max(ranges[i - 1].0 + 1);
    }
    for i in (0..ranges.len().saturating_sub(1)).rev() {
        ranges[i].1 = ranges[i].1.min(ranges[i + 1].1.saturating_sub(1));
    }
    ranges
        .into_iter()
        .enumerate()
        .map(|(i, (lo, hi))| {
            if lo > hi || hi > 254 {
                Err(Error::EmptySearchRange { index: i })
            } else {
                Ok((lo as u8, hi as u8))
            }
        })
        .collect()
}

/// Final cytoplasm threshold of a channel from its selected tuple.
pub fn final_threshold(result: &ThresholdResult, channel: Channel) -> Result<u8> {
    let t = &result.thresholds;
    if t.len() + 1 != channel.n_classes() {
        return Err(Error::InvalidParameter(format!(
            "channel {channel} needs {} classes, result has {}",
            channel.n_classes(),
            t.len() + 1
        )));
    }
    let v = match channel {
        Channel::G => 0.8 * t[1] as f64 + 0.2 * t[2] as f64,
        Channel::H => 0.8 * t[0] as f64 + 0.2 * t[1] as f64,
        Channel::S => t[0] as f64,
    };
    Ok(v.round().clamp(0.0, 255.0) as u8)
}
