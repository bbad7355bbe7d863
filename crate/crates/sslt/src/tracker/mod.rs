//! Multi-channel correlation-filter tracker over HOG features with a small
//! scale pool. Produces the initial per-frame bounding box the pipeline later
//! refines. Fully deterministic: identical frames and config give identical
//! trajectories.

mod hog;

pub use hog::extract_hog;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::Sequence;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::imaging::{
    crop_replicate_map, dft2, idft2, resize_map_bilinear, to_grayscale, ComplexGrid, Image,
    ScalarMap,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Search window = padding x target size.
    pub padding: f64,
    /// Ridge regularization.
    pub lambda: f64,
    /// Exponential moving-average rate for the filter update.
    pub learning_rate: f64,
    /// Desired-response sigma = sigma_factor * sqrt(w * h).
    pub sigma_factor: f64,
    pub cell_size: usize,
    pub orientation_bins: usize,
    pub scale_pool: Vec<f64>,
    /// Long-side cap on the resized search window, in pixels.
    pub model_resolution: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            padding: 2.0,
            lambda: 1e-2,
            learning_rate: 0.025,
            sigma_factor: 0.1,
            cell_size: 4,
            orientation_bins: 9,
            scale_pool: vec![0.95, 1.0, 1.05],
            model_resolution: 384,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.lambda <= 0.0 {
            return bad("tracker lambda must be > 0");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return bad("tracker learning_rate must be in [0, 1]");
        }
        if self.padding <= 1.0 {
            return bad("tracker padding must be > 1");
        }
        if !self.scale_pool.contains(&1.0) {
            return bad("scale pool must contain 1.0");
        }
        if self.cell_size == 0 || self.orientation_bins == 0 || self.model_resolution == 0 {
            return bad("cell size, bins and model resolution must be > 0");
        }
        Ok(())
    }
}

/// Fourier-domain ridge filter plus motion state for one target.
#[derive(Debug, Clone)]
pub struct TrackerState {
    numerators: Vec<ComplexGrid>,
    denominator: ComplexGrid,
    label_fft: ComplexGrid,
    hann: ScalarMap,
    /// Target size at scale 1, frame px.
    target_size: (f64, f64),
    /// Search window at scale 1, frame px.
    window_size: (f64, f64),
    /// Resized search window, px (divisible by cell).
    model_size: (usize, usize),
    center: (f64, f64),
    scale: f64,
    frame_dims: (usize, usize),
    cfg: TrackerConfig,
}

impl TrackerState {
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn feat_dims(&self) -> (usize, usize) {
        (self.model_size.0 / self.cfg.cell_size, self.model_size.1 / self.cfg.cell_size)
    }

    fn label_center(&self) -> (usize, usize) {
        let (fw, fh) = self.feat_dims();
        (fw / 2, fh / 2)
    }
}

fn hann_window(w: usize, h: usize) -> ScalarMap {
    let hann1 = |i: usize, n: usize| -> f64 {
        if n <= 1 {
            1.0
        } else {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        }
    };
    let mut out = ScalarMap::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, hann1(x, w) * hann1(y, h));
        }
    }
    out
}

fn centered_box(center: (f64, f64), w: f64, h: f64) -> BoundingBox {
    BoundingBox { x: center.0 - w / 2.0, y: center.1 - h / 2.0, w, h }
}

/// Hann-windowed HOG channels of the search window at the given center and
/// window size, resampled to the model resolution.
fn window_features(
    gray: &ScalarMap,
    center: (f64, f64),
    window: (f64, f64),
    state_model: (usize, usize),
    cfg: &TrackerConfig,
    hann: &ScalarMap,
) -> Result<Vec<ScalarMap>> {
    let patch = crop_replicate_map(gray, &centered_box(center, window.0, window.1));
    let patch = resize_map_bilinear(&patch, state_model.0, state_model.1)?;
    let mut chans = extract_hog(&patch, cfg.cell_size, cfg.orientation_bins)?;
    for c in &mut chans {
        for (v, &w) in c.data.iter_mut().zip(&hann.data) {
            *v *= w;
        }
    }
    Ok(chans)
}

fn train_on(
    chans: &[ScalarMap],
    label_fft: &ComplexGrid,
    lambda: f64,
) -> (Vec<ComplexGrid>, ComplexGrid) {
    let mut numerators = Vec::with_capacity(chans.len());
    let mut denominator = ComplexGrid::zeros(label_fft.width, label_fft.height);
    for c in chans {
        let xf = dft2(c);
        let mut num = ComplexGrid::zeros(xf.width, xf.height);
        for i in 0..xf.data.len() {
            num.data[i] = label_fft.data[i].conj() * xf.data[i];
            denominator.data[i] += xf.data[i] * xf.data[i].conj();
        }
        numerators.push(num);
    }
    for d in &mut denominator.data {
        *d += Complex64::new(lambda, 0.0);
    }
    (numerators, denominator)
}

/// Initializes the filter from the first frame and its target box.
pub fn track_init(frame: &Image, target: &BoundingBox, cfg: &TrackerConfig) -> Result<TrackerState> {
    cfg.validate()?;
    if target.w < 4.0 || target.h < 4.0 {
        return Err(Error::DegenerateBox { context: "tracker init", w: target.w, h: target.h });
    }

    let window = (target.w * cfg.padding, target.h * cfg.padding);
    let long_side = window.0.max(window.1);
    let shrink = if long_side > cfg.model_resolution as f64 {
        cfg.model_resolution as f64 / long_side
    } else {
        1.0
    };
    let cell = cfg.cell_size;
    let to_cells = |px: f64| (((px * shrink / cell as f64).round() as usize).max(2)) * cell;
    let model_size = (to_cells(window.0), to_cells(window.1));
    let (fw, fh) = (model_size.0 / cell, model_size.1 / cell);

    // Gaussian label in cell coordinates, centered on the feature grid
    let tw_model = target.w * model_size.0 as f64 / window.0;
    let th_model = target.h * model_size.1 as f64 / window.1;
    let sigma = cfg.sigma_factor * (tw_model * th_model).sqrt() / cell as f64;
    let (cx0, cy0) = (fw / 2, fh / 2);
    let mut label = ScalarMap::filled(fw, fh, 0.0);
    for y in 0..fh {
        for x in 0..fw {
            let dx = x as f64 - cx0 as f64;
            let dy = y as f64 - cy0 as f64;
            label.set(x, y, (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
        }
    }
    let label_fft = dft2(&label);
    let hann = hann_window(fw, fh);

    let gray = to_grayscale(frame)?;
    let center = target.center();
    let chans = window_features(&gray, center, window, model_size, cfg, &hann)?;
    let (numerators, denominator) = train_on(&chans, &label_fft, cfg.lambda);

    Ok(TrackerState {
        numerators,
        denominator,
        label_fft,
        hann,
        target_size: (target.w, target.h),
        window_size: window,
        model_size,
        center,
        scale: 1.0,
        frame_dims: (frame.width, frame.height),
        cfg: cfg.clone(),
    })
}

/// Correlation response of the stored filter against the given features.
fn response_map(state: &TrackerState, chans: &[ScalarMap]) -> ScalarMap {
    let (w, h) = (state.label_fft.width, state.label_fft.height);
    let mut resp_hat = ComplexGrid::zeros(w, h);
    for (num, c) in state.numerators.iter().zip(chans) {
        let zf = dft2(c);
        for i in 0..resp_hat.data.len() {
            resp_hat.data[i] += num.data[i].conj() * zf.data[i];
        }
    }
    for i in 0..resp_hat.data.len() {
        // denominator is real-valued by construction
        resp_hat.data[i] /= state.denominator.data[i].re.max(1e-12);
    }
    idft2(&resp_hat)
}

/// Sub-cell peak refinement by a 1-D quadratic fit through three samples.
fn quadratic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = 2.0 * center - left - right;
    if denom.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (right - left) / denom).clamp(-0.5, 0.5)
    }
}

/// Clips a centered box into the frame, preserving positive size.
fn clip_box_to_frame(b: BoundingBox, fw: usize, fh: usize) -> BoundingBox {
    let w = b.w.min(fw as f64).max(1.0);
    let h = b.h.min(fh as f64).max(1.0);
    let x = b.x.clamp(0.0, fw as f64 - w);
    let y = b.y.clamp(0.0, fh as f64 - h);
    BoundingBox { x, y, w, h }
}

/// Detects the target in a new frame and updates the filter. Returns the
/// proposed box, clipped to the frame.
pub fn track_step(state: &mut TrackerState, frame: &Image) -> Result<BoundingBox> {
    if (frame.width, frame.height) != state.frame_dims {
        return Err(Error::FrameDimMismatch {
            got_w: frame.width,
            got_h: frame.height,
            want_w: state.frame_dims.0,
            want_h: state.frame_dims.1,
        });
    }
    let gray = to_grayscale(frame)?;
    let (fw, fh) = state.feat_dims();
    let (cx0, cy0) = state.label_center();

    let mut best: Option<(f64, usize, (usize, usize), ScalarMap)> = None;
    for (si, &pool_scale) in state.cfg.scale_pool.iter().enumerate() {
        let s = state.scale * pool_scale;
        let window = (state.window_size.0 * s, state.window_size.1 * s);
        let chans = window_features(
            &gray,
            state.center,
            window,
            state.model_size,
            &state.cfg,
            &state.hann,
        )?;
        let resp = response_map(state, &chans);
        if resp.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResponse);
        }
        let (mut mx, mut my, mut mv) = (0usize, 0usize, f64::NEG_INFINITY);
        for y in 0..fh {
            for x in 0..fw {
                let v = resp.get(x, y);
                if v > mv {
                    mv = v;
                    mx = x;
                    my = y;
                }
            }
        }
        if best.as_ref().map_or(true, |b| mv > b.0) {
            best = Some((mv, si, (mx, my), resp));
        }
    }
    let (_, best_scale_idx, (mx, my), resp) = best.expect("scale pool is non-empty");

    let dx = if mx > 0 && mx < fw - 1 {
        quadratic_offset(resp.get(mx - 1, my), resp.get(mx, my), resp.get(mx + 1, my))
    } else {
        0.0
    };
    let dy = if my > 0 && my < fh - 1 {
        quadratic_offset(resp.get(mx, my - 1), resp.get(mx, my), resp.get(mx, my + 1))
    } else {
        0.0
    };

    let pool_scale = state.cfg.scale_pool[best_scale_idx];
    let det_scale = state.scale * pool_scale;
    let window = (state.window_size.0 * det_scale, state.window_size.1 * det_scale);
    let cell = state.cfg.cell_size as f64;
    let px_per_cell_x = cell * window.0 / state.model_size.0 as f64;
    let px_per_cell_y = cell * window.1 / state.model_size.1 as f64;
    let shift_x = (mx as f64 + dx - cx0 as f64) * px_per_cell_x;
    let shift_y = (my as f64 + dy - cy0 as f64) * px_per_cell_y;

    let mut cx = state.center.0 + shift_x;
    let mut cy = state.center.1 + shift_y;
    cx = cx.clamp(0.0, state.frame_dims.0 as f64 - 1.0);
    cy = cy.clamp(0.0, state.frame_dims.1 as f64 - 1.0);
    state.center = (cx, cy);
    // damped multiplicative scale update
    state.scale = 0.7 * state.scale + 0.3 * det_scale;

    // EMA filter update on features at the new location and scale
    let eta = state.cfg.learning_rate;
    if eta > 0.0 {
        let window = (state.window_size.0 * state.scale, state.window_size.1 * state.scale);
        let chans = window_features(
            &gray,
            state.center,
            window,
            state.model_size,
            &state.cfg,
            &state.hann,
        )?;
        let (new_num, new_den) = train_on(&chans, &state.label_fft, state.cfg.lambda);
        for (num, new) in state.numerators.iter_mut().zip(&new_num) {
            for (a, b) in num.data.iter_mut().zip(&new.data) {
                *a = *a * (1.0 - eta) + *b * eta;
            }
        }
        for (a, b) in state.denominator.data.iter_mut().zip(&new_den.data) {
            *a = *a * (1.0 - eta) + *b * eta;
        }
    }

    let w = state.target_size.0 * state.scale;
    let h = state.target_size.1 * state.scale;
    let raw = centered_box(state.center, w, h);
    Ok(clip_box_to_frame(raw, state.frame_dims.0, state.frame_dims.1))
}

/// Anything that can propose a per-frame box trajectory for a sequence. Lets
/// a learned backend replace the correlation filter without touching the
/// pipeline.
pub trait BoxProposer {
    fn propose(&self, seq: &Sequence, init: &BoundingBox) -> Result<Vec<BoundingBox>>;
}

/// The default correlation-filter backend.
#[derive(Debug, Clone, Default)]
pub struct CorrelationTracker {
    pub cfg: TrackerConfig,
}

impl BoxProposer for CorrelationTracker {
    fn propose(&self, seq: &Sequence, init: &BoundingBox) -> Result<Vec<BoundingBox>> {
        let mut state = track_init(&seq.frames[0], init, &self.cfg)?;
        let (fw, fh) = state.frame_dims;
        let mut boxes = Vec::with_capacity(seq.frames.len());
        boxes.push(clip_box_to_frame(*init, fw, fh));
        for frame in &seq.frames[1..] {
            boxes.push(track_step(&mut state, frame)?);
        }
        Ok(boxes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Image;

    /// Frame with a bright textured square on a dark background.
    fn square_frame(w: usize, h: usize, left: usize, top: usize, side: usize) -> Image {
        let mut img = Image::filled(w, h, 1, 0.05);
        for y in top..top + side {
            for x in left..left + side {
                let v = 0.7 + 0.25 * (((x * 7 + y * 13) % 10) as f64 / 10.0);
                img.set(x, y, 0, v);
            }
        }
        img
    }

    fn small_cfg() -> TrackerConfig {
        TrackerConfig { scale_pool: vec![1.0], ..TrackerConfig::default() }
    }

    #[test]
    fn response_peaks_at_label_center_after_init() {
        let frame = square_frame(128, 128, 48, 48, 32);
        let target = BoundingBox::new(48.0, 48.0, 32.0, 32.0).unwrap();
        let cfg = small_cfg();
        let state = track_init(&frame, &target, &cfg).unwrap();

        let gray = to_grayscale(&frame).unwrap();
        let chans = window_features(
            &gray,
            state.center,
            state.window_size,
            state.model_size,
            &cfg,
            &state.hann,
        )
        .unwrap();
        let resp = response_map(&state, &chans);
        let (fw, fh) = state.feat_dims();
        let mut arg = (0, 0);
        let mut max = f64::NEG_INFINITY;
        for y in 0..fh {
            for x in 0..fw {
                if resp.get(x, y) > max {
                    max = resp.get(x, y);
                    arg = (x, y);
                }
            }
        }
        let (cx0, cy0) = state.label_center();
        assert!(
            arg.0.abs_diff(cx0) <= 1 && arg.1.abs_diff(cy0) <= 1,
            "peak {arg:?} not within one cell of label center ({cx0}, {cy0})"
        );
    }

    #[test]
    fn huge_lambda_suppresses_response() {
        let frame = square_frame(128, 128, 48, 48, 32);
        let target = BoundingBox::new(48.0, 48.0, 32.0, 32.0).unwrap();
        let cfg = TrackerConfig { lambda: 1e9, ..small_cfg() };
        let state = track_init(&frame, &target, &cfg).unwrap();
        let gray = to_grayscale(&frame).unwrap();
        let chans = window_features(
            &gray,
            state.center,
            state.window_size,
            state.model_size,
            &cfg,
            &state.hann,
        )
        .unwrap();
        let resp = response_map(&state, &chans);
        assert!(resp.data.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn init_is_deterministic() {
        let frame = square_frame(128, 128, 40, 52, 32);
        let target = BoundingBox::new(40.0, 52.0, 32.0, 32.0).unwrap();
        let cfg = TrackerConfig::default();
        let a = track_init(&frame, &target, &cfg).unwrap();
        let b = track_init(&frame, &target, &cfg).unwrap();
        assert_eq!(a.numerators[0].data, b.numerators[0].data);
        assert_eq!(a.denominator.data, b.denominator.data);
    }

    #[test]
    fn stepping_on_init_frame_stays_put() {
        let frame = square_frame(128, 128, 48, 48, 32);
        let target = BoundingBox::new(48.0, 48.0, 32.0, 32.0).unwrap();
        let mut state = track_init(&frame, &target, &TrackerConfig::default()).unwrap();
        let b = track_step(&mut state, &frame).unwrap();
        let (cx, cy) = b.center();
        assert!((cx - 64.0).abs() <= 1.0 && (cy - 64.0).abs() <= 1.0, "drifted to ({cx}, {cy})");
    }

    #[test]
    fn degenerate_init_box_rejected() {
        let frame = square_frame(64, 64, 10, 10, 8);
        let target = BoundingBox::new(10.0, 10.0, 3.0, 8.0).unwrap();
        assert!(track_init(&frame, &target, &TrackerConfig::default()).is_err());
    }

    #[test]
    fn zero_learning_rate_freezes_filter() {
        let frame = square_frame(128, 128, 48, 48, 32);
        let frame2 = square_frame(128, 128, 50, 48, 32);
        let target = BoundingBox::new(48.0, 48.0, 32.0, 32.0).unwrap();
        let cfg = TrackerConfig { learning_rate: 0.0, ..TrackerConfig::default() };
        let mut state = track_init(&frame, &target, &cfg).unwrap();
        let num0 = state.numerators[0].data.clone();
        let den0 = state.denominator.data.clone();
        track_step(&mut state, &frame2).unwrap();
        assert_eq!(state.numerators[0].data, num0);
        assert_eq!(state.denominator.data, den0);
    }

    #[test]
    fn frozen_scale_pool_keeps_box_size() {
        let frame = square_frame(128, 128, 48, 48, 32);
        let target = BoundingBox::new(48.0, 48.0, 32.0, 32.0).unwrap();
        let cfg = small_cfg();
        let mut state = track_init(&frame, &target, &cfg).unwrap();
        for grow in [34, 36, 38] {
            let f = square_frame(128, 128, 64 - grow / 2, 64 - grow / 2, grow);
            let b = track_step(&mut state, &f).unwrap();
            assert!((b.w - 32.0).abs() < 1e-9 && (b.h - 32.0).abs() < 1e-9);
        }
    }
}
