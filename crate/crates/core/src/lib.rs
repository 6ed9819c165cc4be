//! Super-resolution of low-resolution range images guided by a registered
//! high-resolution color image.
//!
//! The low-resolution image is treated as a decimated copy of the unknown
//! high-resolution one and lifted onto the HR grid as sparse samples
//! ([`lift`]). The color image is segmented by mean shift ([`meanshift`]) with
//! bandwidths that grow from pass to pass; in every pass, segments with enough
//! samples get a RANSAC plane ([`planefit`]) and a per-pixel robust cost,
//! smaller ones a single median-based cost coupled to similarly colored
//! neighbors ([`labeling`]). [`pipeline`] runs the loop until every pixel has
//! a label, and [`eval`] scores the result against ground truth and a bicubic
//! baseline.

pub mod error;
pub mod eval;
pub mod io;
pub mod labeling;
pub mod lift;
pub mod meanshift;
pub mod pipeline;
pub mod planefit;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    bicubic_upsample, compute_metrics, run_experiment, Experiment, ExperimentRecord, MetricsReport,
};
pub use labeling::{CostParams, LabelSet};
pub use lift::{decimate, lift_sparse, sparsity_ratio, Anchor, SrFactor};
pub use meanshift::{ColorSpace, MsParams};
pub use pipeline::{bandwidth_schedule, super_resolve, PassReport, SrConfig, SrOutput};
pub use planefit::{FitError, Plane, RansacParams};
pub use raster::{
    ColorImage, Neighborhood, PixelState, RangeImage, SegmentMap, SegmentStats, VisibilityMask,
    VisibilityPolicy,
};
