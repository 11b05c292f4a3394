//! Bottom-up salient object detection.
//!
//! The detector runs two branches over a SLIC superpixel graph: a foreground
//! branch seeded by Boolean-map surroundedness and a background branch seeded
//! by border superpixels. Both are scored by manifold ranking, fused by a
//! second ranking pass and smoothed with geodesic-distance weights. The
//! [`eval`] module holds the benchmark metrics (PR curve, adaptive F-measure,
//! MAE, ROC-AUC).
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). Every parallel path produces bit-identical output to the
//! sequential one.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod imageio;
pub mod linalg;
mod par;
pub mod pipeline;
pub mod ranking_graph;
pub mod superpixel;
pub mod surroundedness;

pub use error::{Error, Result};
pub use eval::{EvalReport, ImageMetrics, PrPoint};
pub use imageio::{BinaryMask, GrayMap, LabImage, RgbImage};
pub use pipeline::{detect_full, Detection, PipelineConfig, SaliencyVector, Stage};
pub use ranking_graph::{AffinityGraph, GeodesicField, SeedSet};
pub use superpixel::Segmentation;
pub use surroundedness::SurroundednessMap;
