//! Segmentation of leukocytes in peripheral blood smear images.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Nucleus**: the hue/saturation/green enhancement image is split into
//!    four characteristic grey levels by stepwise averaging, and the mean of
//!    the two brightest levels thresholds the nuclei ([`swam`]).
//! 2. **Localisation**: nucleus rectangles are merged and widened into a
//!    region of interest sized from the nucleus circularity ([`locator`]).
//! 3. **Cytoplasm**: inside each region, the G, H and S channels each yield a
//!    candidate mask, thresholded by minimising an interval-valued fuzzy
//!    divergence ([`ivfs`]) and repaired at adhesion necks ([`ccir`]). A
//!    scored decision picks the final mask ([`pipeline`]).
//!
//! [`evalsynth`] provides accuracy metrics and a synthetic smear generator;
//! [`batch`] drives directory-level runs for the `leukoseg` binary.

pub mod batch;
pub mod ccir;
pub mod error;
pub mod evalsynth;
pub mod imagecore;
pub mod ivfs;
pub mod locator;
pub mod pipeline;
pub mod swam;

pub use error::{Error, Result};
