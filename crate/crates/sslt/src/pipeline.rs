//! Per-sequence orchestration: tracker pass, salient decision, pseudo-label
//! selection, online fine-tuning, per-frame segmentation and fusion, plus
//! serialization of the run artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::geometry::{
    clamp_min, expand, is_salient_box, refine_from_mask, BoundingBox, GeometryConfig,
};
use crate::imaging::{crop_replicate, rasterize_box, save_mask, Image, Mask};
use crate::saliency::{select_pseudo_label, PseudoLabel, SaliencyConfig};
use crate::seg::{fine_tune, init_model, segment_crop, SegModel, TrainConfig};
use crate::tracker::{BoxProposer, CorrelationTracker, TrackerConfig};

/// Sequence-level salient decision over the per-frame f0 boxes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum SalientPolicy {
    /// Non-salient iff any frame fails the size test (the literal reading).
    AnyFrame,
    /// Salient iff at least `fraction` of frames pass the size test.
    Fraction { fraction: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// Pass-2 refinement never re-enters the tracker.
    Off,
    /// One feedback round: the tracker re-runs seeded by the refined
    /// first-frame box and the frozen model re-segments the new crops.
    RefineFeedsTracker,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub geometry: GeometryConfig,
    pub saliency: SaliencyConfig,
    pub train: TrainConfig,
    pub tracker: TrackerConfig,
    pub salient_policy: SalientPolicy,
    pub feedback_mode: FeedbackMode,
    /// Master seed; module seeds are derived from it per sequence.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            geometry: GeometryConfig::default(),
            saliency: SaliencyConfig::default(),
            train: TrainConfig::default(),
            tracker: TrackerConfig::default(),
            salient_policy: SalientPolicy::AnyFrame,
            feedback_mode: FeedbackMode::Off,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.saliency.validate()?;
        self.train.validate()?;
        self.tracker.validate()?;
        if let SalientPolicy::Fraction { fraction } = self.salient_policy {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "salient fraction {fraction} must be in (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FrameSource {
    SegRefined,
    TrackerFallback,
    TrackerNonsalient,
}

impl FrameSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameSource::SegRefined => "seg-refined",
            FrameSource::TrackerFallback => "tracker-fallback",
            FrameSource::TrackerNonsalient => "tracker-nonsalient",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FrameTimings {
    pub track_s: f64,
    pub segment_s: f64,
    pub fuse_s: f64,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: usize,
    pub f0: BoundingBox,
    pub ft: BoundingBox,
    /// Full-frame mask.
    pub mask: Mask,
    pub final_box: BoundingBox,
    pub source: FrameSource,
    pub timings: FrameTimings,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SequenceTimings {
    pub tracking_s: f64,
    pub selection_s: f64,
    pub finetune_s: f64,
    pub segmentation_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub name: String,
    pub salient: bool,
    pub pseudo_label: Option<PseudoLabel>,
    pub diagnostic: Option<String>,
    pub frames: Vec<FrameResult>,
    pub timings: SequenceTimings,
    pub fps_with_finetune: f64,
    pub fps_excluding_finetune: f64,
    /// Echo of the resolved configuration for reproduction.
    pub config: PipelineConfig,
}

/// Splits one master seed into decorrelated per-module streams.
fn derived_seed(master: u64, salt: u64, sub: u64) -> u64 {
    (master ^ salt).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(sub)
}

const SALIENCY_SALT: u64 = 0x5A11_E9C1_0000_0001;
const TRAIN_SALT: u64 = 0x7E41_9000_0000_0002;
const MODEL_SALT: u64 = 0x3070_D311_0000_0003;

/// Per-frame fusion rule. `mask` is in full-frame coordinates.
pub fn fuse_frame(
    f0: &BoundingBox,
    ft: &BoundingBox,
    mask: &Mask,
    salient: bool,
    frame_dims: (usize, usize),
) -> (BoundingBox, Mask, FrameSource) {
    let _ = ft;
    if salient {
        match refine_from_mask(mask, (0.0, 0.0)) {
            Ok(b) => (b, mask.clone(), FrameSource::SegRefined),
            Err(_) => (*f0, Mask::filled(frame_dims.0, frame_dims.1, false), FrameSource::TrackerFallback),
        }
    } else {
        // keep only the mask pixels inside the f0 raster
        let (bx, by, bw, bh) = rasterize_box(f0);
        let mut kept = Mask::filled(frame_dims.0, frame_dims.1, false);
        for y in 0..frame_dims.1 as i64 {
            for x in 0..frame_dims.0 as i64 {
                if x >= bx
                    && x < bx + bw as i64
                    && y >= by
                    && y < by + bh as i64
                    && mask.get(x as usize, y as usize)
                {
                    kept.set(x as usize, y as usize, true);
                }
            }
        }
        (*f0, kept, FrameSource::TrackerNonsalient)
    }
}

fn salient_decision(boxes: &[BoundingBox], policy: SalientPolicy, threshold: f64) -> bool {
    let pass = boxes.iter().filter(|b| is_salient_box(b, threshold)).count();
    match policy {
        SalientPolicy::AnyFrame => pass == boxes.len(),
        SalientPolicy::Fraction { fraction } => pass as f64 >= fraction * boxes.len() as f64,
    }
}

/// Places a crop-local mask into an empty full-frame mask at the crop's
/// raster origin, dropping anything outside the frame.
fn mask_to_frame(local: &Mask, crop_box: &BoundingBox, frame_dims: (usize, usize)) -> Mask {
    let (ox, oy, _, _) = rasterize_box(crop_box);
    let mut full = Mask::filled(frame_dims.0, frame_dims.1, false);
    for y in 0..local.height {
        for x in 0..local.width {
            if !local.get(x, y) {
                continue;
            }
            let fx = ox + x as i64;
            let fy = oy + y as i64;
            if fx >= 0 && fy >= 0 && (fx as usize) < full.width && (fy as usize) < full.height {
                full.set(fx as usize, fy as usize, true);
            }
        }
    }
    full
}

fn crop_boxes(
    f0: &[BoundingBox],
    geometry: &GeometryConfig,
    frame_dims: (usize, usize),
) -> Result<Vec<BoundingBox>> {
    f0.iter()
        .map(|b| {
            let fe = expand(b, geometry.expand_factor)?;
            clamp_min(&fe, frame_dims.0, frame_dims.1, geometry.min_crop_side)
        })
        .collect()
}

struct SegmentedPass {
    frames: Vec<FrameResult>,
    segment_s: f64,
}

/// Segments every fₜ crop with the frozen model and fuses per frame.
fn segment_and_fuse(
    seq: &Sequence,
    f0: &[BoundingBox],
    ft: &[BoundingBox],
    model: &SegModel,
    salient: bool,
    threshold: f64,
) -> Result<SegmentedPass> {
    let frame_dims = seq.frame_dims();
    let mut frames = Vec::with_capacity(seq.frames.len());
    let mut segment_s = 0.0;
    for (i, frame) in seq.frames.iter().enumerate() {
        let seg_start = Instant::now();
        let crop = crop_replicate(frame, &ft[i]);
        let local = segment_crop(model, &crop, threshold)?;
        let full = mask_to_frame(&local, &ft[i], frame_dims);
        let seg_elapsed = seg_start.elapsed().as_secs_f64();
        segment_s += seg_elapsed;

        let fuse_start = Instant::now();
        let (final_box, mask, source) = fuse_frame(&f0[i], &ft[i], &full, salient, frame_dims);
        frames.push(FrameResult {
            frame_index: i,
            f0: f0[i],
            ft: ft[i],
            mask,
            final_box,
            source,
            timings: FrameTimings {
                track_s: 0.0,
                segment_s: seg_elapsed,
                fuse_s: fuse_start.elapsed().as_secs_f64(),
            },
        });
    }
    Ok(SegmentedPass { frames, segment_s })
}

fn tracker_only_frames(seq: &Sequence, f0: &[BoundingBox], ft: &[BoundingBox]) -> Vec<FrameResult> {
    let (fw, fh) = seq.frame_dims();
    f0.iter()
        .zip(ft)
        .enumerate()
        .map(|(i, (b, t))| FrameResult {
            frame_index: i,
            f0: *b,
            ft: *t,
            mask: Mask::filled(fw, fh, false),
            final_box: *b,
            source: FrameSource::TrackerFallback,
            timings: FrameTimings::default(),
        })
        .collect()
}

/// Runs the full two-pass SSLT pipeline on one sequence.
pub fn run_sequence(
    seq: &Sequence,
    init: &BoundingBox,
    cfg: &PipelineConfig,
) -> Result<SequenceResult> {
    cfg.validate()?;
    let total_start = Instant::now();
    let frame_dims = seq.frame_dims();
    let (ix, iy, iw, ih) = rasterize_box(init);
    if ix < 0 || iy < 0 || ix + iw as i64 > frame_dims.0 as i64 || iy + ih as i64 > frame_dims.1 as i64
    {
        return Err(Error::BoxOutOfBounds {
            x: ix,
            y: iy,
            w: iw,
            h: ih,
            width: frame_dims.0,
            height: frame_dims.1,
        });
    }

    // pass 1: tracker
    let track_start = Instant::now();
    let tracker = CorrelationTracker { cfg: cfg.tracker.clone() };
    let mut f0 = tracker.propose(seq, init)?;
    let mut tracking_s = track_start.elapsed().as_secs_f64();
    let mut ft = crop_boxes(&f0, &cfg.geometry, frame_dims)?;

    let salient =
        salient_decision(&f0, cfg.salient_policy, cfg.geometry.salient_side_threshold);

    // pass 2: pseudo-label selection and fine-tuning (both regimes segment)
    let selection_start = Instant::now();
    let mut sal_cfg = cfg.saliency.clone();
    sal_cfg.seed = derived_seed(cfg.seed, SALIENCY_SALT, cfg.saliency.seed);
    let crops: Vec<(usize, BoundingBox, Image)> = seq
        .frames
        .iter()
        .zip(&ft)
        .enumerate()
        .map(|(i, (frame, b))| (i, *b, crop_replicate(frame, b)))
        .collect();
    let selected = select_pseudo_label(&crops, &sal_cfg);
    let selection_s = selection_start.elapsed().as_secs_f64();

    let pseudo = match selected {
        Ok(p) => p,
        Err(Error::NoSalientCandidate) => {
            // unsalient sequence: degrade to tracker-only output
            let frames = tracker_only_frames(seq, &f0, &ft);
            let total_s = total_start.elapsed().as_secs_f64();
            let n = frames.len() as f64;
            return Ok(SequenceResult {
                name: seq.name.clone(),
                salient,
                pseudo_label: None,
                diagnostic: Some(
                    "every sampled candidate had zero salient area; emitted tracker-only boxes"
                        .into(),
                ),
                frames,
                timings: SequenceTimings {
                    tracking_s,
                    selection_s,
                    finetune_s: 0.0,
                    segmentation_s: 0.0,
                    total_s,
                },
                fps_with_finetune: n / total_s,
                fps_excluding_finetune: n / total_s,
                config: cfg.clone(),
            });
        }
        Err(e) => return Err(e),
    };

    let finetune_start = Instant::now();
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derived_seed(cfg.seed, TRAIN_SALT, cfg.train.seed);
    let model = init_model(derived_seed(cfg.seed, MODEL_SALT, 0));
    let tuned = fine_tune(&model, &pseudo, &crops[pseudo.frame_index].2, &train_cfg)?;
    let finetune_s = finetune_start.elapsed().as_secs_f64();

    let mut pass =
        segment_and_fuse(seq, &f0, &ft, &tuned.model, salient, cfg.train.inference_threshold)?;

    if cfg.feedback_mode == FeedbackMode::RefineFeedsTracker {
        // one feedback round: re-track from the refined first-frame box,
        // then re-segment with the already-trained model
        let refined_init = pass.frames[0].final_box;
        let track_start = Instant::now();
        f0 = tracker.propose(seq, &refined_init)?;
        tracking_s += track_start.elapsed().as_secs_f64();
        ft = crop_boxes(&f0, &cfg.geometry, frame_dims)?;
        let second =
            segment_and_fuse(seq, &f0, &ft, &tuned.model, salient, cfg.train.inference_threshold)?;
        pass.segment_s += second.segment_s;
        pass.frames = second.frames;
    }

    for (i, f) in pass.frames.iter_mut().enumerate() {
        f.timings.track_s = tracking_s / seq.frames.len() as f64;
        debug_assert_eq!(f.frame_index, i);
    }

    let total_s = total_start.elapsed().as_secs_f64();
    let n = seq.frames.len() as f64;
    Ok(SequenceResult {
        name: seq.name.clone(),
        salient,
        pseudo_label: Some(pseudo),
        diagnostic: None,
        frames: pass.frames,
        timings: SequenceTimings {
            tracking_s,
            selection_s,
            finetune_s,
            segmentation_s: pass.segment_s,
            total_s,
        },
        fps_with_finetune: n / total_s,
        fps_excluding_finetune: n / (total_s - finetune_s).max(1e-9),
        config: cfg.clone(),
    })
}

/// Writes boxes.csv, masks/NNNNNN.png and result.json under `out_dir`.
pub fn write_sequence_result(result: &SequenceResult, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let masks_dir = out_dir.join("masks");
    fs::create_dir_all(&masks_dir).map_err(|e| Error::io(&masks_dir, e))?;

    let mut csv = String::from("frame,x,y,w,h,source\n");
    for f in &result.frames {
        let b = &f.final_box;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f.frame_index + 1,
            b.x,
            b.y,
            b.w,
            b.h,
            f.source.as_str()
        ));
        save_mask(&f.mask, &masks_dir.join(format!("{:06}.png", f.frame_index + 1)))?;
    }
    let csv_path = out_dir.join("boxes.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    // raw tracker proposals, kept for overlays and diagnostics
    let mut f0_csv = String::from("frame,x,y,w,h\n");
    for f in &result.frames {
        let b = &f.f0;
        f0_csv.push_str(&format!("{},{},{},{},{}\n", f.frame_index + 1, b.x, b.y, b.w, b.h));
    }
    let f0_path = out_dir.join("f0.csv");
    fs::write(&f0_path, f0_csv).map_err(|e| Error::io(&f0_path, e))?;

    let doc = serde_json::json!({
        "sequence": result.name,
        "salient": result.salient,
        "pseudo_label_frame": result.pseudo_label.as_ref().map(|p| p.frame_index + 1),
        "pseudo_label_salient_area": result.pseudo_label.as_ref().map(|p| p.salient_area),
        "diagnostic": result.diagnostic,
        "seed": result.config.seed,
        "config": result.config,
        "timings": result.timings,
        "fps_with_finetune": result.fps_with_finetune,
        "fps_excluding_finetune": result.fps_excluding_finetune,
    });
    let json_path = out_dir.join("result.json");
    fs::write(&json_path, serde_json::to_string_pretty(&doc)? + "\n")
        .map_err(|e| Error::io(&json_path, e))
}
