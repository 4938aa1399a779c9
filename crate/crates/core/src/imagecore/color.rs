//! RGB to HSI conversion and the hue/saturation/green (HSG) enhancement.

use super::raster::{same_dims, ChannelImage, RasterImage};
use crate::error::Result;

/// Geometric HSI of one pixel: hue in degrees `[0, 360)`, saturation and
/// intensity in `[0, 1]` and `[0, 255]`.
pub fn hsi_pixel(rgb: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (rgb[0] as f64, rgb[1] as f64, rgb[2] as f64);
    let sum = r + g + b;
    let intensity = sum / 3.0;
    if sum == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let min = r.min(g).min(b);
    let saturation = 1.0 - 3.0 * min / sum;
    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    // Grey pixels have no hue.
    if den <= f64::EPSILON || saturation <= 0.0 {
        return (0.0, 0.0, intensity);
    }
    let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
    let mut hue = if b <= g { theta } else { 360.0 - theta };
    if hue >= 360.0 {
        hue -= 360.0;
    }
    (hue, saturation, intensity)
}

/// Converts to H, S, I planes, each rescaled to `[0, 255]`.
pub fn rgb_to_hsi(img: &RasterImage) -> (ChannelImage, ChannelImage, ChannelImage) {
    let n = img.pixels().len();
    let (mut hs, mut ss, mut is) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &p in img.pixels() {
        let (h, s, i) = hsi_pixel(p);
        hs.push(to_u8(h * 255.0 / 360.0));
        ss.push(to_u8(s * 255.0));
        is.push(to_u8(i));
    }
    let (w, h) = img.dims();
    (
        ChannelImage::new(w, h, hs).expect("dims preserved"),
        ChannelImage::new(w, h, ss).expect("dims preserved"),
        ChannelImage::new(w, h, is).expect("dims preserved"),
    )
}

/// Weights of the HSG enhancement `(w1*H + w2*S) / (w3*G)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsgWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for HsgWeights {
    fn default() -> Self {
        Self {
            w1: 0.4,
            w2: 0.6,
            w3: 1.0,
        }
    }
}

/// Raw (unnormalised) HSG value of one pixel, capped at 255.
pub fn hsg_raw(h: u8, s: u8, g: u8, w: &HsgWeights) -> f64 {
    if g == 0 {
        return 255.0;
    }
    let raw = (w.w1 * h as f64 + w.w2 * s as f64) / (w.w3 * g as f64);
    raw.min(255.0)
}

/// HSG enhancement image, min-max rescaled to `[0, 255]` over the image.
/// A constant raw image maps to all zeros.
pub fn hsg_transform(
    h: &ChannelImage,
    s: &ChannelImage,
    g: &ChannelImage,
    weights: &HsgWeights,
) -> Result<ChannelImage> {
    same_dims(h.dims(), s.dims())?;
    same_dims(h.dims(), g.dims())?;
    let raw: Vec<f64> = h
        .values()
        .iter()
        .zip(s.values())
        .zip(g.values())
        .map(|((&hv, &sv), &gv)| hsg_raw(hv, sv, gv, weights))
        .collect();
    let (min, max) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = max - min;
    let values = raw
        .iter()
        .map(|&v| if span > 0.0 { to_u8((v - min) / span * 255.0) } else { 0 })
        .collect();
    ChannelImage::new(h.width(), h.height(), values)
}

/// Convenience: HSG image straight from RGB.
pub fn hsg_from_rgb(img: &RasterImage, weights: &HsgWeights) -> ChannelImage {
    let (h, s, _) = rgb_to_hsi(img);
    hsg_transform(&h, &s, &img.green(), weights).expect("planes share dimensions")
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
