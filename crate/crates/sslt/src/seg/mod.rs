//! Compact fully-convolutional pixel classifier trained online on a single
//! saliency pseudo-label, then applied to every crop of the sequence.
//!
//! Architecture: 5 input channels (R, G, B, normalized x, normalized y),
//! conv3x3(5->16)+ReLU -> conv3x3(16->16)+ReLU -> conv3x3(16->1) -> sigmoid,
//! stride 1, zero same-padding. Weights are uniform in +/-sqrt(6/fan_in),
//! biases zero, all seeded.

mod train;

pub use train::{fine_tune, loss_and_grad, segment_crop, segment_native, FineTuneResult, Gradients};

use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, resize_map_bilinear, Image, ScalarMap};

pub const INPUT_CHANNELS: usize = 5;
pub const KERNEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    /// Row-major [out][in][ky][kx].
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    fn init(in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (in_ch * KERNEL * KERNEL) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let weights = (0..out_ch * in_ch * KERNEL * KERNEL)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        ConvLayer { in_ch, out_ch, weights, bias: vec![0.0; out_ch] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegModel {
    pub input_resolution: usize,
    pub layers: Vec<ConvLayer>,
    pub seed: u64,
}

/// Training hyperparameters for online fine-tuning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Probability of horizontally flipping crop and label per iteration.
    pub flip_probability: f64,
    /// Threshold applied to probabilities at inference.
    pub inference_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300,
            learning_rate: 1e-2,
            momentum: 0.9,
            flip_probability: 0.5,
            inference_threshold: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidTrainConfig("iterations must be >= 1"));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::InvalidTrainConfig("learning rate must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidTrainConfig("momentum must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidTrainConfig("flip probability must be in [0, 1]"));
        }
        if !(self.inference_threshold > 0.0 && self.inference_threshold < 1.0) {
            return Err(Error::InvalidTrainConfig("inference threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

pub fn init_model(seed: u64) -> SegModel {
    init_model_with_resolution(seed, 96)
}

pub fn init_model_with_resolution(seed: u64, input_resolution: usize) -> SegModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SegModel {
        input_resolution,
        layers: vec![
            ConvLayer::init(INPUT_CHANNELS, 16, &mut rng),
            ConvLayer::init(16, 16, &mut rng),
            ConvLayer::init(16, 1, &mut rng),
        ],
        seed,
    }
}

/// Channel-planar tensor: `data[c * w * h + y * w + x]`.
#[derive(Debug, Clone)]
pub(crate) struct Tensor {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, width: usize, height: usize) -> Self {
        Tensor { channels, width, height, data: vec![0.0; channels * width * height] }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        debug_assert!(c < self.channels);
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Builds the 5-channel input tensor at (w, h): RGB (gray replicated when
/// single-channel) plus normalized x and y coordinate planes.
pub(crate) fn build_input(crop: &Image, w: usize, h: usize) -> Result<Tensor> {
    let resized = resize_bilinear(crop, w, h)?;
    let mut t = Tensor::zeros(INPUT_CHANNELS, w, h);
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let (r, g, b) = if resized.channels == 3 {
                (resized.get(x, y, 0), resized.get(x, y, 1), resized.get(x, y, 2))
            } else {
                let v = resized.get(x, y, 0);
                (v, v, v)
            };
            t.plane_mut(0)[idx] = r;
            t.plane_mut(1)[idx] = g;
            t.plane_mut(2)[idx] = b;
            t.plane_mut(3)[idx] = if w > 1 { x as f64 / (w - 1) as f64 } else { 0.0 };
            t.plane_mut(4)[idx] = if h > 1 { y as f64 / (h - 1) as f64 } else { 0.0 };
        }
    }
    Ok(t)
}

pub(crate) fn conv_forward(input: &Tensor, layer: &ConvLayer) -> Tensor {
    let (w, h) = (input.width, input.height);
    let mut out = Tensor::zeros(layer.out_ch, w, h);
    let r = (KERNEL / 2) as i64;
    for o in 0..layer.out_ch {
        let bias = layer.bias[o];
        let out_plane = out.plane_mut(o);
        for v in out_plane.iter_mut() {
            *v = bias;
        }
        for i in 0..layer.in_ch {
            let in_plane = input.plane(i);
            let wbase = (o * layer.in_ch + i) * KERNEL * KERNEL;
            for ky in 0..KERNEL as i64 {
                for kx in 0..KERNEL as i64 {
                    let wgt = layer.weights[wbase as usize
                        + (ky as usize) * KERNEL
                        + kx as usize];
                    if wgt == 0.0 {
                        continue;
                    }
                    let dy = ky - r;
                    let dx = kx - r;
                    let y_lo = (-dy).max(0);
                    let y_hi = (h as i64 - dy).min(h as i64);
                    for y in y_lo..y_hi {
                        let sy = (y + dy) as usize;
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = ((w as i64 - dx).min(w as i64)) as usize;
                        let orow = y as usize * w;
                        let irow = sy * w;
                        for x in x_lo..x_hi {
                            out.data[o * w * h + orow + x] +=
                                wgt * in_plane[irow + (x as i64 + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn relu_inplace(t: &mut Tensor) {
    for v in &mut t.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// All layer activations of one forward pass, kept for backprop.
pub(crate) struct ForwardTrace {
    pub input: Tensor,
    /// Pre-activation outputs of each conv layer.
    pub pre_acts: Vec<Tensor>,
    /// Sigmoid probabilities of the final layer.
    pub probs: Vec<f64>,
}

pub(crate) fn forward_trace(model: &SegModel, input: Tensor) -> Result<ForwardTrace> {
    let mut pre_acts = Vec::with_capacity(model.layers.len());
    let mut current = input.clone();
    for (li, layer) in model.layers.iter().enumerate() {
        let z = conv_forward(&current, layer);
        if z.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation);
        }
        pre_acts.push(z.clone());
        current = z;
        if li + 1 < model.layers.len() {
            relu_inplace(&mut current);
        }
    }
    let probs: Vec<f64> = current.plane(0).iter().map(|&z| sigmoid(z)).collect();
    Ok(ForwardTrace { input, pre_acts, probs })
}

/// Probability map at the model's input resolution, resized back to crop
/// dimensions.
pub fn forward(model: &SegModel, crop: &Image) -> Result<ScalarMap> {
    let res = model.input_resolution;
    let input = build_input(crop, res, res)?;
    let trace = forward_trace(model, input)?;
    let probs = ScalarMap::new(res, res, trace.probs)?;
    resize_map_bilinear(&probs, crop.width, crop.height)
}

/// Fully-convolutional application of the same weights at the raster's
/// native resolution; cost scales with raster area. Used where processing a
/// crop instead of the whole frame is the point.
pub fn forward_native(model: &SegModel, raster: &Image) -> Result<ScalarMap> {
    let input = build_input(raster, raster.width, raster.height)?;
    let trace = forward_trace(model, input)?;
    ScalarMap::new(raster.width, raster.height, trace.probs)
}

const MODEL_MAGIC: &str = "SSLT-SEG v1";

/// Writes the model as a versioned text header followed by little-endian
/// 64-bit reals (weights then biases, per layer).
pub fn save_model(model: &SegModel, path: &Path) -> Result<()> {
    let mut header = format!(
        "{MODEL_MAGIC}\ninput_resolution {}\nseed {}\nlayers {}\n",
        model.input_resolution,
        model.seed,
        model.layers.len()
    );
    for l in &model.layers {
        header.push_str(&format!("layer {} {}\n", l.in_ch, l.out_ch));
    }
    header.push_str("data\n");
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for l in &model.layers {
        for &v in l.weights.iter().chain(&l.bias) {
            file.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SegModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let data_tag = b"data\n";
    let split = bytes
        .windows(data_tag.len())
        .position(|w| w == data_tag)
        .ok_or_else(|| Error::BadModelFile("missing data marker".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::BadModelFile("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(Error::BadModelFile("bad magic".into()));
    }
    let mut input_resolution = None;
    let mut seed = None;
    let mut layer_count = None;
    let mut shapes: Vec<(usize, usize)> = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("input_resolution") => {
                input_resolution = parts.next().and_then(|v| v.parse().ok());
            }
            Some("seed") => seed = parts.next().and_then(|v| v.parse().ok()),
            Some("layers") => layer_count = parts.next().and_then(|v| v.parse().ok()),
            Some("layer") => {
                let i = parts.next().and_then(|v| v.parse().ok());
                let o = parts.next().and_then(|v| v.parse().ok());
                if let (Some(i), Some(o)) = (i, o) {
                    shapes.push((i, o));
                }
            }
            _ => return Err(Error::BadModelFile(format!("unexpected header line '{line}'"))),
        }
    }
    let input_resolution =
        input_resolution.ok_or_else(|| Error::BadModelFile("missing input_resolution".into()))?;
    let seed = seed.ok_or_else(|| Error::BadModelFile("missing seed".into()))?;
    let layer_count: usize =
        layer_count.ok_or_else(|| Error::BadModelFile("missing layer count".into()))?;
    if shapes.len() != layer_count {
        return Err(Error::BadModelFile("layer shape count mismatch".into()));
    }
    for pair in shapes.windows(2) {
        if pair[0].1 != pair[1].0 {
            return Err(Error::BadModelFile("layer shapes do not chain".into()));
        }
    }

    let mut reader = &bytes[split + data_tag.len()..];
    let mut read_f64 = || -> Result<f64> {
        let mut buf = [0u8; 8];
        reader
            .read_exact(&mut buf)
            .map_err(|_| Error::BadModelFile("truncated weight data".into()))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut layers = Vec::with_capacity(layer_count);
    for (in_ch, out_ch) in shapes {
        let mut weights = Vec::with_capacity(out_ch * in_ch * KERNEL * KERNEL);
        for _ in 0..out_ch * in_ch * KERNEL * KERNEL {
            weights.push(read_f64()?);
        }
        let mut bias = Vec::with_capacity(out_ch);
        for _ in 0..out_ch {
            bias.push(read_f64()?);
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::BadModelFile("non-finite weight".into()));
        }
        layers.push(ConvLayer { in_ch, out_ch, weights, bias });
    }
    Ok(SegModel { input_resolution, layers, seed })
}
