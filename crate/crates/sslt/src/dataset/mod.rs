//! Sequence loading and synthetic sequence generation.
//!
//! On-disk layout per sequence:
//!
//! ```text
//! <dir>/frames/NNNNNN.png     zero-padded, contiguous from 000001
//! <dir>/groundtruth.txt       one "x,y,w,h" line per frame
//! <dir>/masks/NNNNNN.png      optional, {0,255} gray
//! ```

mod synth;

pub use synth::{
    default_target_polygon, generate_synthetic, is_spin_or_deform, render_synthetic,
    split_challenge_suite, BackgroundMode, MotionStep, SynthConfig,
};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{load_image, load_mask, Image, Mask};

/// An ordered run of frames with identical dimensions.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Image>,
    pub frame_paths: Vec<PathBuf>,
}

impl Sequence {
    pub fn frame_dims(&self) -> (usize, usize) {
        (self.frames[0].width, self.frames[0].height)
    }
}

/// Per-frame annotation: boxes always, masks when the dataset provides them.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub boxes: Vec<BoundingBox>,
    pub masks: Option<Vec<Mask>>,
}

fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

fn bad_seq(dir: &Path, reason: impl Into<String>) -> Error {
    Error::BadSequence { dir: dir.to_path_buf(), reason: reason.into() }
}

fn parse_box_line(line: &str, line_no: usize) -> Result<BoundingBox> {
    let parts: Vec<&str> = line.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(Error::BadGroundTruthLine {
            line: line_no,
            reason: format!("expected 4 comma-separated values, got {}", parts.len()),
        });
    }
    let mut vals = [0.0f64; 4];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p.trim().parse().map_err(|_| Error::BadGroundTruthLine {
            line: line_no,
            reason: format!("cannot parse '{}' as a real", p.trim()),
        })?;
    }
    BoundingBox::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| Error::BadGroundTruthLine {
        line: line_no,
        reason: e.to_string(),
    })
}

/// Loads a sequence directory: frames sorted by index, one box per frame,
/// masks binarized at value > 127 when present.
pub fn load_sequence(dir: &Path) -> Result<(Sequence, GroundTruth)> {
    let frames_dir = dir.join("frames");
    let mut indices: Vec<usize> = Vec::new();
    let entries =
        fs::read_dir(&frames_dir).map_err(|e| bad_seq(dir, format!("frames/: {e}")))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&frames_dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".png") {
            let idx: usize = stem
                .parse()
                .map_err(|_| bad_seq(dir, format!("unexpected frame file name '{name}'")))?;
            indices.push(idx);
        }
    }
    indices.sort_unstable();
    if indices.len() < 2 {
        return Err(bad_seq(dir, format!("need >= 2 frames, found {}", indices.len())));
    }
    for (i, &idx) in indices.iter().enumerate() {
        if idx != i + 1 {
            return Err(bad_seq(
                dir,
                format!("frame indices not contiguous from 000001: missing {:06}", i + 1),
            ));
        }
    }

    let mut frames = Vec::with_capacity(indices.len());
    let mut frame_paths = Vec::with_capacity(indices.len());
    for &idx in &indices {
        let path = frames_dir.join(frame_file_name(idx));
        frames.push(load_image(&path)?);
        frame_paths.push(path);
    }
    let (w, h) = (frames[0].width, frames[0].height);
    for (i, f) in frames.iter().enumerate() {
        if f.width != w || f.height != h {
            return Err(bad_seq(
                dir,
                format!("frame {:06} is {}x{}, expected {}x{}", i + 1, f.width, f.height, w, h),
            ));
        }
    }

    let gt_path = dir.join("groundtruth.txt");
    let gt_text = fs::read_to_string(&gt_path).map_err(|e| Error::io(&gt_path, e))?;
    let mut boxes = Vec::new();
    for (i, line) in gt_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        boxes.push(parse_box_line(line, i + 1)?);
    }
    if boxes.len() != frames.len() {
        return Err(bad_seq(
            dir,
            format!("{} frames but {} ground-truth boxes", frames.len(), boxes.len()),
        ));
    }

    let masks_dir = dir.join("masks");
    let masks = if masks_dir.is_dir() {
        let mut masks = Vec::with_capacity(frames.len());
        for &idx in &indices {
            let path = masks_dir.join(frame_file_name(idx));
            let mask = load_mask(&path)?;
            if mask.width != w || mask.height != h {
                return Err(bad_seq(
                    dir,
                    format!(
                        "mask {:06} is {}x{}, expected {}x{}",
                        idx, mask.width, mask.height, w, h
                    ),
                ));
            }
            masks.push(mask);
        }
        Some(masks)
    } else {
        None
    };

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string());
    Ok((Sequence { name, frames, frame_paths }, GroundTruth { boxes, masks }))
}
