//! Saliency maps inside crops, their binarization, and pseudo-label
//! selection for online training.
//!
//! The default backend is spectral-residual saliency: suppress the smooth
//! part of the log amplitude spectrum, reconstruct with the original phase,
//! and smooth the squared reconstruction. The backend sits behind an id so a
//! learned model can drop in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{
    dft2, gaussian_blur, idft2_complex, resize_map_bilinear, to_grayscale, ComplexGrid, Image,
    Mask, ScalarMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SaliencyBackend {
    SpectralResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizeMode {
    /// Foreground wherever the map is nonzero. Degenerates on continuous
    /// maps; kept for fidelity testing.
    LiteralNonzero,
    /// Foreground where the map exceeds tau_rel times its maximum.
    RelativeThreshold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaliencyConfig {
    pub backend: SaliencyBackend,
    /// Input resized to this width (aspect preserved) before the transform.
    pub working_width: usize,
    pub smoothing_sigma: f64,
    pub binarize_mode: BinarizeMode,
    pub tau_rel: f64,
    /// Number of candidate frames sampled for pseudo-label selection.
    pub candidate_count: usize,
    pub seed: u64,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        SaliencyConfig {
            backend: SaliencyBackend::SpectralResidual,
            working_width: 64,
            smoothing_sigma: 2.5,
            binarize_mode: BinarizeMode::RelativeThreshold,
            tau_rel: 0.2,
            candidate_count: 10,
            seed: 0,
        }
    }
}

impl SaliencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.working_width < 16 {
            return Err(Error::InvalidConfig("saliency working_width must be >= 16".into()));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(Error::InvalidConfig("saliency tau_rel must be in (0, 1)".into()));
        }
        if self.candidate_count == 0 {
            return Err(Error::InvalidConfig("saliency candidate_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// The chosen training label: the sampled crop whose binarized saliency map
/// has the largest salient area.
#[derive(Debug, Clone)]
pub struct PseudoLabel {
    pub frame_index: usize,
    pub crop_box: BoundingBox,
    pub label_mask: Mask,
    pub salient_area: usize,
}

/// 3x3 box filter with replicated edges.
fn box3(map: &ScalarMap) -> ScalarMap {
    let (w, h) = (map.width as i64, map.height as i64);
    let mut out = ScalarMap::filled(map.width, map.height, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let sx = (x + dx).clamp(0, w - 1) as usize;
                    let sy = (y + dy).clamp(0, h - 1) as usize;
                    acc += map.get(sx, sy);
                }
            }
            out.set(x as usize, y as usize, acc / 9.0);
        }
    }
    out
}

/// Spectral-residual saliency map of the crop, normalized to [0, 1] and
/// returned at crop resolution. A constant crop yields the all-zero map.
pub fn saliency_map(crop: &Image, cfg: &SaliencyConfig) -> Result<ScalarMap> {
    cfg.validate()?;
    if crop.width < 16 || crop.height < 16 {
        return Err(Error::DegenerateSaliencyCrop { w: crop.width, h: crop.height });
    }
    let gray = to_grayscale(crop)?;
    let ww = cfg.working_width;
    let wh = ((crop.height as f64 * ww as f64 / crop.width as f64).round() as usize).max(1);
    let small = resize_map_bilinear(&gray, ww, wh)?;

    // a constant crop carries no structure; the spectral residual of pure
    // FFT noise would otherwise normalize to full range
    let lo = small.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = small.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        return Ok(ScalarMap::filled(crop.width, crop.height, 0.0));
    }

    let spectrum = dft2(&small);
    let log_amp = ScalarMap {
        width: ww,
        height: wh,
        data: spectrum.data.iter().map(|c| (c.norm() + 1e-12).ln()).collect(),
    };
    let residual_data: Vec<f64> = log_amp
        .data
        .iter()
        .zip(&box3(&log_amp).data)
        .map(|(l, s)| l - s)
        .collect();

    let mut recon = ComplexGrid::zeros(ww, wh);
    for i in 0..recon.data.len() {
        let phase = spectrum.data[i].arg();
        recon.data[i] = Complex64::from_polar(residual_data[i].exp(), phase);
    }
    let spatial = idft2_complex(&recon);
    let mut energy = ScalarMap {
        width: ww,
        height: wh,
        data: spatial.data.iter().map(|c| c.norm_sqr()).collect(),
    };
    // the DFT treats the crop as periodic, so the wrap-around discontinuity
    // shows up as spurious border energy; drop a thin margin before blurring
    const BORDER: usize = 2;
    for y in 0..wh {
        for x in 0..ww {
            if x < BORDER || y < BORDER || x >= ww - BORDER || y >= wh - BORDER {
                energy.set(x, y, 0.0);
            }
        }
    }
    let smoothed = gaussian_blur(&energy, cfg.smoothing_sigma)?;

    let min = smoothed.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = smoothed.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let normalized = if max - min < 1e-12 {
        ScalarMap::filled(ww, wh, 0.0)
    } else {
        ScalarMap {
            width: ww,
            height: wh,
            data: smoothed.data.iter().map(|v| (v - min) / (max - min)).collect(),
        }
    };
    resize_map_bilinear(&normalized, crop.width, crop.height)
}

/// Thresholds a saliency map into a binary mask. The relative mode also
/// fills enclosed holes: spectral residual marks the contour of a large
/// object rather than its interior, and the pseudo-label needs the filled
/// region.
pub fn binarize(p: &ScalarMap, cfg: &SaliencyConfig) -> Mask {
    let data = match cfg.binarize_mode {
        BinarizeMode::LiteralNonzero => p.data.iter().map(|&v| v != 0.0).collect(),
        BinarizeMode::RelativeThreshold => {
            let max = p.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let thr = cfg.tau_rel * max;
            let mask = Mask {
                width: p.width,
                height: p.height,
                data: p.data.iter().map(|&v| v > thr).collect(),
            };
            return fill_holes(&mask);
        }
    };
    Mask { width: p.width, height: p.height, data }
}

/// Foreground plus any background region not 4-connected to the border.
fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let mut outside = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let push = |x: usize, y: usize, outside: &mut Vec<bool>, stack: &mut Vec<(usize, usize)>| {
        if !mask.get(x, y) && !outside[y * w + x] {
            outside[y * w + x] = true;
            stack.push((x, y));
        }
    };
    for x in 0..w {
        push(x, 0, &mut outside, &mut stack);
        push(x, h - 1, &mut outside, &mut stack);
    }
    for y in 0..h {
        push(0, y, &mut outside, &mut stack);
        push(w - 1, y, &mut outside, &mut stack);
    }
    while let Some((x, y)) = stack.pop() {
        let mut visit = |nx: usize, ny: usize| {
            if !mask.get(nx, ny) && !outside[ny * w + nx] {
                outside[ny * w + nx] = true;
                stack.push((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    Mask { width: w, height: h, data: (0..w * h).map(|i| !outside[i]).collect() }
}

/// Number of foreground pixels.
pub fn salient_area(mask: &Mask) -> usize {
    mask.count()
}

/// Samples min(K, N) distinct candidate frames with the seeded RNG, computes
/// each candidate's binarized saliency map, and returns the one with the
/// largest salient area (ties broken by smallest frame index).
pub fn select_pseudo_label(
    crops: &[(usize, BoundingBox, Image)],
    cfg: &SaliencyConfig,
) -> Result<PseudoLabel> {
    cfg.validate()?;
    if crops.is_empty() {
        return Err(Error::NoSalientCandidate);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.candidate_count.min(crops.len());
    let mut sampled: Vec<usize> =
        rand::seq::index::sample(&mut rng, crops.len(), k).into_iter().collect();
    // iterate in frame order so the earliest-index tie-break is by position
    sampled.sort_unstable();

    let mut best: Option<PseudoLabel> = None;
    for i in sampled {
        let (frame_index, crop_box, ref crop) = crops[i];
        let p = saliency_map(crop, cfg)?;
        let mask = binarize(&p, cfg);
        let area = salient_area(&mask);
        let better = match &best {
            None => true,
            Some(b) => area > b.salient_area,
        };
        if better {
            best = Some(PseudoLabel {
                frame_index,
                crop_box,
                label_mask: mask,
                salient_area: area,
            });
        }
    }
    let best = best.expect("at least one candidate was sampled");
    if best.salient_area == 0 {
        return Err(Error::NoSalientCandidate);
    }
    Ok(best)
}
