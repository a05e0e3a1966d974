//! Multiscale spatiotemporal event detection in geotagged microblog streams.
//!
//! Two detectors share one pipeline: a local baseline that links records
//! close in time and space with textual similarity (`Method::Led`), and a
//! multiscale detector that weighs shared terms by wavelet similarity of
//! their count series at the scale matching the records' distance
//! (`Method::Med`). Both feed a single-level Louvain clustering.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detect;
pub mod error;
pub mod graph;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod parallel;
pub mod synth;
pub mod text;
pub mod wavelet;

pub use config::DetectionConfig;
pub use detect::{Detection, Detector, EventCluster, Method, PipelineResult};
pub use error::{Error, Result};
pub use model::{BoundingBox, Domain, Frame, Record, TimeWindow};
pub use parallel::Exec;
