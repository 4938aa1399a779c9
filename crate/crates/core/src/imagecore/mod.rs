//! Raster substrate shared by every stage of the pipeline.

pub mod color;
pub mod components;
pub mod draw;
pub mod io;
pub mod morphology;
pub mod raster;

pub use color::{hsg_from_rgb, hsg_transform, rgb_to_hsi, HsgWeights};
pub use components::{
    circularity, connected_components, largest_component, shape_stats, trace_contour, Component, Contour, ShapeStats,
};
pub use raster::{apply_threshold, histogram, BinaryMask, ChannelImage, Histogram, Polarity, RasterImage, Roi};
