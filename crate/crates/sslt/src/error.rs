use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. Raster and geometry operations report the
/// offending values so callers can print actionable diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("raster data length {got} does not match {width}x{height}x{channels}")]
    BadRasterLength {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },

    #[error("box ({x}, {y}, {w}, {h}) does not lie within a {width}x{height} raster")]
    BoxOutOfBounds {
        x: i64,
        y: i64,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid box: w = {w}, h = {h} (both must be positive and finite)")]
    InvalidBox { w: f64, h: f64 },

    #[error("degenerate box for {context}: {w}x{h} px")]
    DegenerateBox { context: &'static str, w: f64, h: f64 },

    #[error("zero target dimension in resize")]
    ZeroResizeDim,

    #[error("negative blur sigma {0}")]
    NegativeSigma(f64),

    #[error("expanding factor {0} must be >= 1")]
    ExpandFactorBelowOne(f64),

    #[error("minimum threshold {tr} exceeds frame side (frame {width}x{height})")]
    ThresholdExceedsFrame { tr: f64, width: usize, height: usize },

    #[error("empty mask: no foreground pixel to refine from")]
    EmptyMask,

    #[error("invalid HOG parameter: {0}")]
    InvalidHogParam(&'static str),

    #[error("tracker produced a non-finite response at frame step")]
    NonFiniteResponse,

    #[error("frame dimensions {got_w}x{got_h} differ from tracker init {want_w}x{want_h}")]
    FrameDimMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("crop too small for saliency: {w}x{h} (need >= 16 px per side)")]
    DegenerateSaliencyCrop { w: usize, h: usize },

    #[error("every saliency candidate has zero salient area")]
    NoSalientCandidate,

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("non-finite activation in segmentation forward pass")]
    NonFiniteActivation,

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(&'static str),

    #[error("model file corrupt: {0}")]
    BadModelFile(String),

    #[error("sequence at {dir}: {reason}")]
    BadSequence { dir: PathBuf, reason: String },

    #[error("ground truth line {line}: {reason}")]
    BadGroundTruthLine { line: usize, reason: String },

    #[error("frame {frame}: target leaves frame bounds")]
    TargetOutOfFrame { frame: usize },

    #[error("invalid synth config: {0}")]
    InvalidSynthConfig(String),

    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("missing or corrupt artifact {path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn png(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Png { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
