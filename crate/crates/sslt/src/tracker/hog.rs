//! Histogram-of-oriented-gradients features over cell grids.
//!
//! Unsigned gradients, hard orientation binning, block L2 normalization over
//! 2x2 cell neighbourhoods with clipping at 0.2 and renormalization. Each
//! cell's final descriptor is the average of its contributions across the
//! blocks containing it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imaging::ScalarMap;

const CLIP: f64 = 0.2;
const EPS: f64 = 1e-10;

/// Replicate-pads the patch on the right/bottom so dims divide the cell size.
fn pad_to_cell(patch: &ScalarMap, cell: usize) -> ScalarMap {
    let w = patch.width.div_ceil(cell) * cell;
    let h = patch.height.div_ceil(cell) * cell;
    if w == patch.width && h == patch.height {
        return patch.clone();
    }
    let mut out = ScalarMap::filled(w, h, 0.0);
    for y in 0..h {
        let sy = y.min(patch.height - 1);
        for x in 0..w {
            let sx = x.min(patch.width - 1);
            out.set(x, y, patch.get(sx, sy));
        }
    }
    out
}

/// Per-cell orientation histograms as `bins` scalar channels of size
/// (patch_w / cell) x (patch_h / cell).
pub fn extract_hog(patch: &ScalarMap, cell: usize, bins: usize) -> Result<Vec<ScalarMap>> {
    if cell == 0 {
        return Err(Error::InvalidHogParam("cell size must be > 0"));
    }
    if bins == 0 {
        return Err(Error::InvalidHogParam("orientation bin count must be > 0"));
    }
    let patch = pad_to_cell(patch, cell);
    let (w, h) = (patch.width, patch.height);
    let (cw, ch) = (w / cell, h / cell);

    // raw per-cell histograms
    let mut hist = vec![vec![0.0f64; cw * ch]; bins];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            let gx = patch.get(xp, y) - patch.get(xm, y);
            let gy = patch.get(x, yp) - patch.get(x, ym);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(PI);
            let bin = ((theta / (PI / bins as f64)) as usize).min(bins - 1);
            hist[bin][(y / cell) * cw + (x / cell)] += mag;
        }
    }

    let mut out = vec![vec![0.0f64; cw * ch]; bins];
    let mut weight = vec![0.0f64; cw * ch];
    if cw < 2 || ch < 2 {
        // grid too small for 2x2 blocks: global L2 with clipping
        let norm: f64 = hist
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        if norm > EPS {
            let clipped: Vec<Vec<f64>> = hist
                .iter()
                .map(|c| c.iter().map(|v| (v / norm).min(CLIP)).collect())
                .collect();
            let renorm: f64 = clipped
                .iter()
                .flat_map(|c| c.iter())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(EPS);
            for (b, chan) in clipped.iter().enumerate() {
                for (i, &v) in chan.iter().enumerate() {
                    out[b][i] = v / renorm;
                }
            }
        }
        return collect_channels(out, cw, ch);
    }

    for by in 0..ch - 1 {
        for bx in 0..cw - 1 {
            let cells = [
                by * cw + bx,
                by * cw + bx + 1,
                (by + 1) * cw + bx,
                (by + 1) * cw + bx + 1,
            ];
            let norm: f64 = cells
                .iter()
                .map(|&ci| hist.iter().map(|c| c[ci] * c[ci]).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if norm <= EPS {
                for &ci in &cells {
                    weight[ci] += 1.0;
                }
                continue;
            }
            // normalize, clip, renormalize the 4*bins block vector
            let mut block: Vec<f64> = Vec::with_capacity(4 * bins);
            for &ci in &cells {
                for c in &hist {
                    block.push((c[ci] / norm).min(CLIP));
                }
            }
            let renorm = block.iter().map(|v| v * v).sum::<f64>().sqrt().max(EPS);
            for (k, &ci) in cells.iter().enumerate() {
                for b in 0..bins {
                    out[b][ci] += block[k * bins + b] / renorm;
                }
                weight[ci] += 1.0;
            }
        }
    }
    for chan in &mut out {
        for (v, &wgt) in chan.iter_mut().zip(&weight) {
            if wgt > 0.0 {
                *v /= wgt;
            }
        }
    }
    collect_channels(out, cw, ch)
}

fn collect_channels(chans: Vec<Vec<f64>>, cw: usize, ch: usize) -> Result<Vec<ScalarMap>> {
    chans.into_iter().map(|data| ScalarMap::new(cw, ch, data)).collect()
}
