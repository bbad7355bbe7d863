//! SSLT: tracking-plus-segmentation fusion for rigid free-moving targets.
//!
//! A correlation-filter tracker proposes per-frame boxes, a
//! saliency-supervised online-trained segmenter produces binary masks inside
//! expanded crops, and a fusion rule refines the final trajectory and
//! boundary. Includes a synthetic sequence generator and the full evaluation
//! suite (precision/success curves, S-measure, J and F statistics).

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod saliency;
pub mod seg;
pub mod tracker;

pub use error::{Error, Result};
