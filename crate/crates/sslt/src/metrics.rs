//! Evaluation machinery: distance-precision and overlap/success curves with
//! AUC, structure measure, region similarity (J) and contour accuracy (F)
//! statistics, and run-level aggregation.
//!
//! J/F recall and decay follow the DAVIS conventions (recall = fraction of
//! frames above 0.5; decay = first temporal quartile mean minus fourth),
//! noted as such in emitted metadata.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{load_mask, Mask, ScalarMap};

/// Threshold sweep with its reference score and area under the curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveReport {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
    pub score_at_reference: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegReport {
    pub s_measure: f64,
    pub j_mean: f64,
    pub j_recall: f64,
    pub j_decay: f64,
    pub f_mean: f64,
    pub f_recall: f64,
    pub f_decay: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub dp_thresholds: Vec<f64>,
    pub op_thresholds: Vec<f64>,
    /// Boundary matching tolerance as a fraction of the image diagonal.
    pub f_tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            dp_thresholds: (0..=100).map(|t| t as f64).collect(),
            op_thresholds: (0..=100).map(|t| t as f64 / 100.0).collect(),
            f_tolerance: 0.008,
        }
    }
}

const DP_REFERENCE_PX: f64 = 100.0;
const OP_REFERENCE_IOU: f64 = 0.5;

fn check_lengths(pred: usize, gt: usize) -> Result<()> {
    if pred != gt {
        return Err(Error::LengthMismatch { left: pred, right: gt });
    }
    Ok(())
}

/// Fraction of frames whose center distance falls below each threshold.
pub fn dp_curve(
    pred: &[BoundingBox],
    gt: &[BoundingBox],
    thresholds: &[f64],
) -> Result<CurveReport> {
    check_lengths(pred.len(), gt.len())?;
    let dists: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p.center_distance(g)).collect();
    let frac_below = |t: f64| dists.iter().filter(|&&d| d < t).count() as f64 / dists.len() as f64;
    let values: Vec<f64> = thresholds.iter().map(|&t| frac_below(t)).collect();
    let auc = values.iter().sum::<f64>() / values.len().max(1) as f64;
    Ok(CurveReport {
        thresholds: thresholds.to_vec(),
        values,
        score_at_reference: frac_below(DP_REFERENCE_PX),
        auc,
    })
}

/// Fraction of frames whose IoU exceeds each threshold (success curve).
pub fn op_curve(
    pred: &[BoundingBox],
    gt: &[BoundingBox],
    thresholds: &[f64],
) -> Result<CurveReport> {
    check_lengths(pred.len(), gt.len())?;
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| p.iou(g)).collect();
    let frac_above = |t: f64| ious.iter().filter(|&&v| v > t).count() as f64 / ious.len() as f64;
    let values: Vec<f64> = thresholds.iter().map(|&t| frac_above(t)).collect();
    let auc = values.iter().sum::<f64>() / values.len().max(1) as f64;
    Ok(CurveReport {
        thresholds: thresholds.to_vec(),
        values,
        score_at_reference: frac_above(OP_REFERENCE_IOU),
        auc,
    })
}

const S_EPS: f64 = 1e-12;

fn mean(vals: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in vals {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Object-aware term on one class: 2 mu / (mu^2 + 1 + std + eps).
fn object_score(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mu = mean(values.iter().cloned());
    let var = mean(values.iter().map(|v| (v - mu) * (v - mu)));
    2.0 * mu / (mu * mu + 1.0 + var.sqrt() + S_EPS)
}

struct Block {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

fn block_ssim(sm: &ScalarMap, gt: &Mask, b: &Block) -> f64 {
    let mut xs = Vec::with_capacity((b.x1 - b.x0) * (b.y1 - b.y0));
    let mut ys = Vec::with_capacity(xs.capacity());
    for y in b.y0..b.y1 {
        for x in b.x0..b.x1 {
            xs.push(sm.get(x, y));
            ys.push(if gt.get(x, y) { 1.0 } else { 0.0 });
        }
    }
    let n = xs.len() as f64;
    if n < 1.0 {
        return 1.0;
    }
    let mx = mean(xs.iter().cloned());
    let my = mean(ys.iter().cloned());
    // sample statistics with the n-1 normalization
    let denom_n = (n - 1.0).max(1.0);
    let vx = xs.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / denom_n;
    let vy = ys.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / denom_n;
    let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / denom_n;
    let alpha = 4.0 * mx * my * cov;
    let beta = (mx * mx + my * my) * (vx + vy);
    if alpha == 0.0 && beta == 0.0 {
        1.0
    } else if alpha == 0.0 {
        0.0
    } else {
        alpha / (beta + S_EPS)
    }
}

/// Structure measure of a foreground map against a binary ground truth:
/// `max(0, 0.5 * S_object + 0.5 * S_region)` with the degenerate-GT rules
/// `gt empty -> 1 - mean(sm)` and `gt full -> mean(sm)`.
pub fn s_measure(sm: &ScalarMap, gt: &Mask) -> Result<f64> {
    if sm.width != gt.width || sm.height != gt.height {
        return Err(Error::DimMismatch(format!(
            "saliency map {}x{} vs ground truth {}x{}",
            sm.width, sm.height, gt.width, gt.height
        )));
    }
    let total = gt.width * gt.height;
    let fg_count = gt.count();
    if fg_count == 0 {
        return Ok(1.0 - mean(sm.data.iter().cloned()));
    }
    if fg_count == total {
        return Ok(mean(sm.data.iter().cloned()));
    }

    // object-aware: foreground scored on sm, background on 1 - sm
    let fg: Vec<f64> = sm.data.iter().zip(&gt.data).filter(|(_, &g)| g).map(|(&v, _)| v).collect();
    let bg: Vec<f64> =
        sm.data.iter().zip(&gt.data).filter(|(_, &g)| !g).map(|(&v, _)| 1.0 - v).collect();
    let mu = fg_count as f64 / total as f64;
    let s_object = mu * object_score(&fg) + (1.0 - mu) * object_score(&bg);

    // region-aware: four blocks split at the foreground centroid, weighted
    // by each block's share of the foreground
    let (mut cx, mut cy) = (0.0, 0.0);
    for y in 0..gt.height {
        for x in 0..gt.width {
            if gt.get(x, y) {
                cx += x as f64;
                cy += y as f64;
            }
        }
    }
    let cx = ((cx / fg_count as f64).round() as usize + 1).min(gt.width - 1).max(1);
    let cy = ((cy / fg_count as f64).round() as usize + 1).min(gt.height - 1).max(1);
    let blocks = [
        Block { x0: 0, x1: cx, y0: 0, y1: cy },
        Block { x0: cx, x1: gt.width, y0: 0, y1: cy },
        Block { x0: 0, x1: cx, y0: cy, y1: gt.height },
        Block { x0: cx, x1: gt.width, y0: cy, y1: gt.height },
    ];
    let mut s_region = 0.0;
    for b in &blocks {
        let mut block_fg = 0usize;
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                if gt.get(x, y) {
                    block_fg += 1;
                }
            }
        }
        let weight = block_fg as f64 / fg_count as f64;
        if weight > 0.0 {
            s_region += weight * block_ssim(sm, gt, b);
        }
    }

    Ok((0.5 * s_object + 0.5 * s_region).max(0.0))
}

pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimMismatch(format!(
            "mask {}x{} vs mask {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Mean, recall (> 0.5 rate) and temporal decay (first quartile bin mean
/// minus fourth) of a per-frame score series.
fn series_stats(scores: &[f64]) -> (f64, f64, f64) {
    let m = mean(scores.iter().cloned());
    let recall = scores.iter().filter(|&&v| v > 0.5).count() as f64 / scores.len().max(1) as f64;
    let n = scores.len();
    let bin = |k: usize| -> f64 { mean(scores[k * n / 4..(k + 1) * n / 4].iter().cloned()) };
    let decay = if n >= 4 { bin(0) - bin(3) } else { 0.0 };
    (m, recall, decay)
}

pub fn j_stats(pred: &[Mask], gt: &[Mask]) -> Result<(f64, f64, f64)> {
    check_lengths(pred.len(), gt.len())?;
    let scores: Vec<f64> =
        pred.iter().zip(gt).map(|(p, g)| mask_iou(p, g)).collect::<Result<_>>()?;
    Ok(series_stats(&scores))
}

/// Boundary pixels: foreground with any 4-connected neighbour outside the
/// foreground (frame border counts as background).
fn boundary(mask: &Mask) -> Mask {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut out = Mask::filled(mask.width, mask.height, false);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            let eroded = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().all(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as usize, ny as usize)
            });
            if !eroded {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

fn dilate_disk(mask: &Mask, radius: usize) -> Mask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width as i64, mask.height as i64);
    let r = radius as i64;
    let r2 = (radius * radius) as i64;
    let mut out = Mask::filled(mask.width, mask.height, false);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy > r2 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        out.set(nx as usize, ny as usize, true);
                    }
                }
            }
        }
    }
    out
}

/// Contour F-score of one frame under dilation-based matching.
pub fn boundary_f_score(pred: &Mask, gt: &Mask, tolerance: f64) -> Result<f64> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::DimMismatch(format!(
            "pred {}x{} vs gt {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let pb = boundary(pred);
    let gb = boundary(gt);
    let (np, ng) = (pb.count(), gb.count());
    if np == 0 && ng == 0 {
        return Ok(1.0);
    }
    if np == 0 || ng == 0 {
        return Ok(0.0);
    }
    let diag = ((pred.width * pred.width + pred.height * pred.height) as f64).sqrt();
    let radius = (tolerance * diag).ceil() as usize;
    let gb_dilated = dilate_disk(&gb, radius);
    let pb_dilated = dilate_disk(&pb, radius);
    let matched_p =
        pb.data.iter().zip(&gb_dilated.data).filter(|(&p, &g)| p && g).count() as f64;
    let matched_g =
        gb.data.iter().zip(&pb_dilated.data).filter(|(&g, &p)| g && p).count() as f64;
    let precision = matched_p / np as f64;
    let recall = matched_g / ng as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn f_stats(pred: &[Mask], gt: &[Mask], tolerance: f64) -> Result<(f64, f64, f64)> {
    check_lengths(pred.len(), gt.len())?;
    if tolerance <= 0.0 {
        return Err(Error::InvalidConfig("F tolerance must be > 0".into()));
    }
    let scores: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| boundary_f_score(p, g, tolerance))
        .collect::<Result<_>>()?;
    Ok(series_stats(&scores))
}

/// Everything evaluated for one run directory.
#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub report: SegReport,
    pub fps_excluding_finetune: f64,
    pub precision: CurveReport,
    pub success: CurveReport,
    pub sequences: Vec<String>,
}

fn artifact_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadArtifact { path: path.to_path_buf(), reason: reason.into() }
}

fn parse_boxes_csv(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "frame,x,y,w,h,source" => {}
        other => {
            return Err(artifact_err(path, format!("bad header {other:?}")));
        }
    }
    let mut boxes = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(artifact_err(path, format!("line {}: expected 6 fields", i + 2)));
        }
        let get = |k: usize| -> Result<f64> {
            parts[k]
                .trim()
                .parse()
                .map_err(|_| artifact_err(path, format!("line {}: bad number", i + 2)))
        };
        boxes.push(
            BoundingBox::new(get(1)?, get(2)?, get(3)?, get(4)?)
                .map_err(|e| artifact_err(path, e.to_string()))?,
        );
    }
    Ok(boxes)
}

fn mask_to_map(mask: &Mask) -> ScalarMap {
    ScalarMap {
        width: mask.width,
        height: mask.height,
        data: mask.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    }
}

/// Evaluates every sequence subdirectory of `run_dir` against ground truth
/// under `data_dir`, macro-averaging across sequences, and writes
/// metrics.json plus the two curve CSVs into `run_dir`.
pub fn evaluate_run(run_dir: &Path, data_dir: &Path, cfg: &EvalConfig) -> Result<EvalOutput> {
    let mut seq_names: Vec<String> = Vec::new();
    let entries = fs::read_dir(run_dir).map_err(|e| Error::io(run_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(run_dir, e))?;
        if entry.path().join("boxes.csv").is_file() {
            seq_names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    seq_names.sort();
    if seq_names.is_empty() {
        return Err(artifact_err(run_dir, "no sequence results (boxes.csv) found"));
    }

    let mut dp_acc = vec![0.0; cfg.dp_thresholds.len()];
    let mut op_acc = vec![0.0; cfg.op_thresholds.len()];
    let mut dp_ref = 0.0;
    let mut op_ref = 0.0;
    let mut sums = BTreeMap::new();
    for key in [
        "s_measure", "j_mean", "j_recall", "j_decay", "f_mean", "f_recall", "f_decay", "fps",
        "fps_ex",
    ] {
        sums.insert(key.to_string(), 0.0f64);
    }

    for name in &seq_names {
        let seq_run = run_dir.join(name);
        let (_, gt) = crate::dataset::load_sequence(&data_dir.join(name))?;
        let gt_masks = gt.masks.as_ref().ok_or_else(|| {
            artifact_err(&data_dir.join(name), "ground-truth masks required for evaluation")
        })?;
        let pred_boxes = parse_boxes_csv(&seq_run.join("boxes.csv"))?;
        check_lengths(pred_boxes.len(), gt.boxes.len())?;

        let mut pred_masks = Vec::with_capacity(pred_boxes.len());
        for i in 0..pred_boxes.len() {
            let path = seq_run.join("masks").join(format!("{:06}.png", i + 1));
            pred_masks.push(load_mask(&path)?);
        }

        let dp = dp_curve(&pred_boxes, &gt.boxes, &cfg.dp_thresholds)?;
        let op = op_curve(&pred_boxes, &gt.boxes, &cfg.op_thresholds)?;
        for (a, v) in dp_acc.iter_mut().zip(&dp.values) {
            *a += v;
        }
        for (a, v) in op_acc.iter_mut().zip(&op.values) {
            *a += v;
        }
        dp_ref += dp.score_at_reference;
        op_ref += op.score_at_reference;

        let s = mean(
            pred_masks
                .iter()
                .zip(gt_masks)
                .map(|(p, g)| s_measure(&mask_to_map(p), g))
                .collect::<Result<Vec<f64>>>()?
                .into_iter(),
        );
        let (jm, jr, jd) = j_stats(&pred_masks, gt_masks)?;
        let (fm, fr, fd) = f_stats(&pred_masks, gt_masks, cfg.f_tolerance)?;

        let result_path = seq_run.join("result.json");
        let result_text =
            fs::read_to_string(&result_path).map_err(|e| Error::io(&result_path, e))?;
        let result: serde_json::Value = serde_json::from_str(&result_text)?;
        let fps = result["fps_with_finetune"]
            .as_f64()
            .ok_or_else(|| artifact_err(&result_path, "missing fps_with_finetune"))?;
        let fps_ex = result["fps_excluding_finetune"]
            .as_f64()
            .ok_or_else(|| artifact_err(&result_path, "missing fps_excluding_finetune"))?;

        for (key, v) in [
            ("s_measure", s),
            ("j_mean", jm),
            ("j_recall", jr),
            ("j_decay", jd),
            ("f_mean", fm),
            ("f_recall", fr),
            ("f_decay", fd),
            ("fps", fps),
            ("fps_ex", fps_ex),
        ] {
            *sums.get_mut(key).unwrap() += v;
        }
    }

    let n = seq_names.len() as f64;
    let avg = |k: &str| sums[k] / n;
    let dp_values: Vec<f64> = dp_acc.iter().map(|v| v / n).collect();
    let op_values: Vec<f64> = op_acc.iter().map(|v| v / n).collect();
    let precision = CurveReport {
        thresholds: cfg.dp_thresholds.clone(),
        auc: dp_values.iter().sum::<f64>() / dp_values.len().max(1) as f64,
        values: dp_values,
        score_at_reference: dp_ref / n,
    };
    let success = CurveReport {
        thresholds: cfg.op_thresholds.clone(),
        auc: op_values.iter().sum::<f64>() / op_values.len().max(1) as f64,
        values: op_values,
        score_at_reference: op_ref / n,
    };
    let report = SegReport {
        s_measure: avg("s_measure"),
        j_mean: avg("j_mean"),
        j_recall: avg("j_recall"),
        j_decay: avg("j_decay"),
        f_mean: avg("f_mean"),
        f_recall: avg("f_recall"),
        f_decay: avg("f_decay"),
        fps: avg("fps"),
    };
    let output = EvalOutput {
        report,
        fps_excluding_finetune: avg("fps_ex"),
        precision,
        success,
        sequences: seq_names,
    };
    write_eval_artifacts(run_dir, &output)?;
    Ok(output)
}

fn write_curve_csv(path: &Path, curve: &CurveReport) -> Result<()> {
    let mut text = String::from("threshold,value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        text.push_str(&format!("{t:.6},{v:.6}\n"));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_eval_artifacts(run_dir: &Path, out: &EvalOutput) -> Result<()> {
    write_curve_csv(&run_dir.join("precision_curve.csv"), &out.precision)?;
    write_curve_csv(&run_dir.join("success_curve.csv"), &out.success)?;
    let mut doc = serde_json::Map::new();
    let r = &out.report;
    for (k, v) in [
        ("s_measure", r.s_measure),
        ("j_mean", r.j_mean),
        ("j_recall", r.j_recall),
        ("j_decay", r.j_decay),
        ("f_mean", r.f_mean),
        ("f_recall", r.f_recall),
        ("f_decay", r.f_decay),
        ("fps", r.fps),
        ("fps_excluding_finetune", out.fps_excluding_finetune),
        ("precision_score", out.precision.score_at_reference),
        ("precision_auc", out.precision.auc),
        ("success_score", out.success.score_at_reference),
        ("success_auc", out.success.auc),
    ] {
        doc.insert(k.to_string(), serde_json::json!(v));
    }
    doc.insert("precision_curve".into(), serde_json::json!("precision_curve.csv"));
    doc.insert("success_curve".into(), serde_json::json!("success_curve.csv"));
    doc.insert(
        "conventions".into(),
        serde_json::json!({
            "recall": "DAVIS: fraction of frames with score > 0.5",
            "decay": "DAVIS: first temporal quartile mean minus fourth",
        }),
    );
    let path = run_dir.join("metrics.json");
    fs::write(&path, serde_json::to_string_pretty(&serde_json::Value::Object(doc))? + "\n")
        .map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn dp_curve_hand_cases() {
        let a = vec![bx(10.0, 10.0, 20.0, 20.0); 2];
        let dp = dp_curve(&a, &a, &[0.0, 1.0, 50.0]).unwrap();
        assert_eq!(dp.values, vec![0.0, 1.0, 1.0]);

        // one of two centers offset by 150 px
        let pred = vec![bx(0.0, 0.0, 10.0, 10.0), bx(150.0, 0.0, 10.0, 10.0)];
        let gt = vec![bx(0.0, 0.0, 10.0, 10.0), bx(0.0, 0.0, 10.0, 10.0)];
        let dp = dp_curve(&pred, &gt, &[100.0]).unwrap();
        assert_eq!(dp.values, vec![0.5]);
        assert_eq!(dp.score_at_reference, 0.5);

        assert_eq!(bx(10.0, 10.0, 20.0, 20.0).center(), (20.0, 20.0));
    }

    #[test]
    fn op_curve_hand_cases() {
        let a = vec![bx(0.0, 0.0, 2.0, 2.0)];
        let op = op_curve(&a, &a, &[0.0, 0.5, 0.99]).unwrap();
        assert_eq!(op.values, vec![1.0, 1.0, 1.0]);
        let op = op_curve(&a, &[bx(10.0, 10.0, 2.0, 2.0)], &[0.0, 0.5]).unwrap();
        assert_eq!(op.values, vec![0.0, 0.0]);
        assert!(dp_curve(&a, &[], &[1.0]).is_err());
    }

    fn checker_gt() -> Mask {
        let mut gt = Mask::filled(20, 20, false);
        for y in 4..12 {
            for x in 6..15 {
                gt.set(x, y, true);
            }
        }
        gt
    }

    #[test]
    fn s_measure_perfect_prediction_is_one() {
        let gt = checker_gt();
        let sm = mask_to_map(&gt);
        assert!((s_measure(&sm, &gt).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn s_measure_degenerate_gt() {
        let sm = ScalarMap::filled(10, 10, 0.3);
        let empty = Mask::filled(10, 10, false);
        assert!((s_measure(&sm, &empty).unwrap() - 0.7).abs() < 1e-12);
        let full = Mask::filled(10, 10, true);
        assert!((s_measure(&sm, &full).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn s_measure_complement_is_zero() {
        let gt = checker_gt();
        let sm = ScalarMap {
            width: gt.width,
            height: gt.height,
            data: gt.data.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect(),
        };
        assert_eq!(s_measure(&sm, &gt).unwrap(), 0.0);
    }

    #[test]
    fn j_stats_binning_rule() {
        let fg = Mask::filled(4, 4, true);
        let bg = Mask::filled(4, 4, false);
        let pred = vec![fg.clone(), fg.clone(), bg.clone(), bg.clone()];
        let gt = vec![fg.clone(); 4];
        let (m, r, d) = j_stats(&pred, &gt).unwrap();
        // per-frame J = [1, 1, 0, 0]
        assert_eq!((m, r, d), (0.5, 0.5, 1.0));
        let (m, r, d) = j_stats(&gt, &gt).unwrap();
        assert_eq!((m, r, d), (1.0, 1.0, 0.0));
    }

    #[test]
    fn f_score_edge_cases() {
        let gt = checker_gt();
        assert_eq!(boundary_f_score(&gt, &gt, 0.008).unwrap(), 1.0);
        let empty = Mask::filled(20, 20, false);
        assert_eq!(boundary_f_score(&empty, &gt, 0.008).unwrap(), 0.0);
        assert_eq!(boundary_f_score(&empty, &empty, 0.008).unwrap(), 1.0);
    }

    #[test]
    fn f_score_monotone_in_tolerance() {
        let gt = checker_gt();
        let mut pred = Mask::filled(20, 20, false);
        for y in 5..13 {
            for x in 7..16 {
                pred.set(x, y, true);
            }
        }
        let mut prev = 0.0;
        for tol in [0.005, 0.02, 0.05, 0.15] {
            let f = boundary_f_score(&pred, &gt, tol).unwrap();
            assert!(f >= prev - 1e-12, "F decreased from {prev} to {f} at tol {tol}");
            prev = f;
        }
    }
}
