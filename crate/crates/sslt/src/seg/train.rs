//! Class-balanced cross-entropy loss, exact reverse-mode gradients, and
//! single-sample SGD fine-tuning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{resize_mask_nearest, Image, Mask};
use crate::saliency::PseudoLabel;

use super::{
    build_input, forward, forward_native, forward_trace, ConvLayer, SegModel, Tensor, TrainConfig,
    KERNEL,
};

const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: Gradients,
    /// True when the label was all-positive or all-negative and the loss
    /// fell back to unweighted cross-entropy.
    pub degenerate_label: bool,
}

fn conv_backward(
    input: &Tensor,
    layer: &ConvLayer,
    delta: &Tensor,
) -> (LayerGrad, Tensor) {
    let (w, h) = (input.width, input.height);
    let r = (KERNEL / 2) as i64;
    let mut dw = vec![0.0; layer.weights.len()];
    let mut db = vec![0.0; layer.out_ch];
    let mut din = Tensor::zeros(layer.in_ch, w, h);

    for o in 0..layer.out_ch {
        let dplane = delta.plane(o);
        db[o] = dplane.iter().sum();
        for i in 0..layer.in_ch {
            let iplane = input.plane(i);
            let wbase = (o * layer.in_ch + i) * KERNEL * KERNEL;
            for ky in 0..KERNEL as i64 {
                for kx in 0..KERNEL as i64 {
                    let dy = ky - r;
                    let dx = kx - r;
                    let mut acc = 0.0;
                    let y_lo = (-dy).max(0);
                    let y_hi = (h as i64 - dy).min(h as i64);
                    for y in y_lo..y_hi {
                        let sy = (y + dy) as usize;
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = ((w as i64 - dx).min(w as i64)) as usize;
                        let drow = y as usize * w;
                        let irow = sy * w;
                        for x in x_lo..x_hi {
                            acc += dplane[drow + x] * iplane[irow + (x as i64 + dx) as usize];
                        }
                    }
                    dw[wbase + (ky as usize) * KERNEL + kx as usize] = acc;
                }
            }
        }
    }

    // dInput: correlate delta with the flipped kernel
    for o in 0..layer.out_ch {
        let dplane = delta.plane(o);
        for i in 0..layer.in_ch {
            let wbase = (o * layer.in_ch + i) * KERNEL * KERNEL;
            for ky in 0..KERNEL as i64 {
                for kx in 0..KERNEL as i64 {
                    let wgt = layer.weights[wbase + (ky as usize) * KERNEL + kx as usize];
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
                        let drow = y as usize * w;
                        let irow = sy * w;
                        for x in x_lo..x_hi {
                            din.data[i * w * h + irow + (x as i64 + dx) as usize] +=
                                wgt * dplane[drow + x];
                        }
                    }
                }
            }
        }
    }
    (LayerGrad { weights: dw, bias: db }, din)
}

/// Class-balanced binary cross-entropy with exact analytic gradients.
///
/// `L = -(beta * sum_pos log y + (1 - beta) * sum_neg log(1 - y)) / N` with
/// `beta = |neg| / (|pos| + |neg|)`; falls back to unweighted cross-entropy
/// when the label is single-class.
pub fn loss_and_grad(model: &SegModel, crop: &Image, label: &Mask) -> Result<LossOutput> {
    let res = model.input_resolution;
    let label = resize_mask_nearest(label, res, res)?;
    let input = build_input(crop, res, res)?;
    let trace = forward_trace(model, input)?;

    let n = (res * res) as f64;
    let pos = label.count();
    let neg = res * res - pos;
    let degenerate_label = pos == 0 || neg == 0;
    let (w_pos, w_neg) = if degenerate_label {
        (1.0, 1.0)
    } else {
        let beta = neg as f64 / n;
        (beta, 1.0 - beta)
    };

    let mut loss = 0.0;
    let mut delta = Tensor::zeros(1, res, res);
    for (i, (&t, &y)) in label.data.iter().zip(&trace.probs).enumerate() {
        if t {
            loss -= w_pos * y.max(LOG_EPS).ln();
            delta.data[i] = -w_pos * (1.0 - y) / n;
        } else {
            loss -= w_neg * (1.0 - y).max(LOG_EPS).ln();
            delta.data[i] = w_neg * y / n;
        }
    }
    loss /= n;

    // activations feeding each layer
    let mut act1 = trace.pre_acts[0].clone();
    super::relu_inplace(&mut act1);
    let mut act2 = trace.pre_acts[1].clone();
    super::relu_inplace(&mut act2);

    let (g3, din3) = conv_backward(&act2, &model.layers[2], &delta);
    let mut delta2 = din3;
    for (d, &z) in delta2.data.iter_mut().zip(&trace.pre_acts[1].data) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let (g2, din2) = conv_backward(&act1, &model.layers[1], &delta2);
    let mut delta1 = din2;
    for (d, &z) in delta1.data.iter_mut().zip(&trace.pre_acts[0].data) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let (g1, _) = conv_backward(&trace.input, &model.layers[0], &delta1);

    Ok(LossOutput {
        loss,
        grads: Gradients { layers: vec![g1, g2, g3] },
        degenerate_label,
    })
}

fn flip_image(img: &Image) -> Image {
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            for c in 0..img.channels {
                out.set(x, y, c, img.get(img.width - 1 - x, y, c));
            }
        }
    }
    out
}

fn flip_mask(mask: &Mask) -> Mask {
    let mut out = mask.clone();
    for y in 0..mask.height {
        for x in 0..mask.width {
            out.set(x, y, mask.get(mask.width - 1 - x, y));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FineTuneResult {
    pub model: SegModel,
    pub loss_trace: Vec<f64>,
}

/// Runs seeded SGD with momentum on the single (crop, pseudo-label) pair,
/// optionally flipping both horizontally each iteration.
pub fn fine_tune(
    model: &SegModel,
    pseudo: &PseudoLabel,
    crop: &Image,
    cfg: &TrainConfig,
) -> Result<FineTuneResult> {
    cfg.validate()?;
    if pseudo.label_mask.width != crop.width || pseudo.label_mask.height != crop.height {
        return Err(Error::DimMismatch(format!(
            "pseudo-label {}x{} vs crop {}x{}",
            pseudo.label_mask.width, pseudo.label_mask.height, crop.width, crop.height
        )));
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<LayerGrad> = model
        .layers
        .iter()
        .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.out_ch] })
        .collect();
    let flipped_pair = (flip_image(crop), flip_mask(&pseudo.label_mask));
    let mut loss_trace = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let flip = rng.gen::<f64>() < cfg.flip_probability;
        let (c, l) = if flip {
            (&flipped_pair.0, &flipped_pair.1)
        } else {
            (crop, &pseudo.label_mask)
        };
        let out = loss_and_grad(&model, c, l)?;
        if !out.loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        loss_trace.push(out.loss);
        for ((layer, vel), grad) in
            model.layers.iter_mut().zip(&mut velocity).zip(&out.grads.layers)
        {
            for (i, v) in vel.weights.iter_mut().enumerate() {
                *v = cfg.momentum * *v - cfg.learning_rate * grad.weights[i];
                layer.weights[i] += *v;
            }
            for (i, v) in vel.bias.iter_mut().enumerate() {
                *v = cfg.momentum * *v - cfg.learning_rate * grad.bias[i];
                layer.bias[i] += *v;
            }
        }
    }
    Ok(FineTuneResult { model, loss_trace })
}

/// Forward pass followed by a strict `> threshold` comparison.
pub fn segment_crop(model: &SegModel, crop: &Image, threshold: f64) -> Result<Mask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!("threshold {threshold} must be in (0, 1)")));
    }
    let p = forward(model, crop)?;
    Ok(Mask {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|&v| v > threshold).collect(),
    })
}

/// Like [`segment_crop`] but fully convolutional at native resolution.
pub fn segment_native(model: &SegModel, raster: &Image, threshold: f64) -> Result<Mask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!("threshold {threshold} must be in (0, 1)")));
    }
    let p = forward_native(model, raster)?;
    Ok(Mask {
        width: p.width,
        height: p.height,
        data: p.data.iter().map(|&v| v > threshold).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use crate::seg::init_model_with_resolution;

    fn blob_fixture(size: usize) -> (Image, Mask) {
        let mut img = Image::filled(size, size, 3, 0.05);
        let mut mask = Mask::filled(size, size, false);
        let c = size as f64 / 2.0;
        let r = size as f64 / 4.0;
        for y in 0..size {
            for x in 0..size {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                if d < r {
                    for ch in 0..3 {
                        img.set(x, y, ch, 0.85);
                    }
                    mask.set(x, y, true);
                }
            }
        }
        (img, mask)
    }

    #[test]
    fn uniform_half_prediction_matches_closed_form_loss() {
        let mut model = init_model_with_resolution(0, 16);
        for l in &mut model.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let (img, mask) = blob_fixture(16);
        let out = loss_and_grad(&model, &img, &mask).unwrap();
        let n = 256.0;
        let p = mask.count() as f64 / n;
        let beta = 1.0 - p;
        let expected = (2.0f64).ln() * (beta * p + (1.0 - beta) * (1.0 - p));
        assert!((out.loss - expected).abs() < 1e-12, "{} vs {expected}", out.loss);
        assert!(!out.degenerate_label);
    }

    #[test]
    fn single_class_label_falls_back_to_unweighted() {
        let model = init_model_with_resolution(0, 8);
        let img = Image::filled(8, 8, 3, 0.5);
        let out = loss_and_grad(&model, &img, &Mask::filled(8, 8, false)).unwrap();
        assert!(out.degenerate_label);
        assert!(out.loss.is_finite());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (img, mask) = blob_fixture(8);
        for seed in [1u64, 2, 3] {
            let model = init_model_with_resolution(seed, 8);
            let analytic = loss_and_grad(&model, &img, &mask).unwrap();
            let step = 1e-5;
            // spot-check a spread of weights in every layer plus biases
            for li in 0..model.layers.len() {
                let nw = model.layers[li].weights.len();
                for wi in (0..nw).step_by(nw / 7 + 1) {
                    let mut plus = model.clone();
                    plus.layers[li].weights[wi] += step;
                    let mut minus = model.clone();
                    minus.layers[li].weights[wi] -= step;
                    let fd = (loss_and_grad(&plus, &img, &mask).unwrap().loss
                        - loss_and_grad(&minus, &img, &mask).unwrap().loss)
                        / (2.0 * step);
                    let an = analytic.grads.layers[li].weights[wi];
                    let denom = fd.abs().max(an.abs()).max(1e-8);
                    assert!(
                        (fd - an).abs() / denom < 1e-4,
                        "seed {seed} layer {li} weight {wi}: fd {fd} vs analytic {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let model = init_model_with_resolution(3, 16);
        let (img, mask) = blob_fixture(16);
        let pseudo = PseudoLabel {
            frame_index: 0,
            crop_box: BoundingBox::new(0.0, 0.0, 16.0, 16.0).unwrap(),
            label_mask: mask,
            salient_area: 1,
        };
        let cfg = TrainConfig { learning_rate: 0.0, iterations: 5, ..TrainConfig::default() };
        let out = fine_tune(&model, &pseudo, &img, &cfg).unwrap();
        assert_eq!(out.model, model);
    }

    #[test]
    fn fine_tune_is_deterministic() {
        let model = init_model_with_resolution(3, 16);
        let (img, mask) = blob_fixture(16);
        let pseudo = PseudoLabel {
            frame_index: 0,
            crop_box: BoundingBox::new(0.0, 0.0, 16.0, 16.0).unwrap(),
            label_mask: mask,
            salient_area: 1,
        };
        let cfg = TrainConfig { iterations: 20, ..TrainConfig::default() };
        let a = fine_tune(&model, &pseudo, &img, &cfg).unwrap();
        let b = fine_tune(&model, &pseudo, &img, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn training_loss_trends_down() {
        let model = init_model_with_resolution(5, 32);
        let (img, mask) = blob_fixture(32);
        let pseudo = PseudoLabel {
            frame_index: 0,
            crop_box: BoundingBox::new(0.0, 0.0, 32.0, 32.0).unwrap(),
            label_mask: mask,
            salient_area: 1,
        };
        let cfg = TrainConfig { iterations: 100, ..TrainConfig::default() };
        let out = fine_tune(&model, &pseudo, &img, &cfg).unwrap();
        let median = |s: &[f64]| {
            let mut v = s.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let tenth = out.loss_trace.len() / 10;
        assert!(
            median(&out.loss_trace[out.loss_trace.len() - tenth..])
                < median(&out.loss_trace[..tenth]),
            "loss did not decrease"
        );
    }

    #[test]
    fn zero_weight_model_thresholds_to_empty_mask() {
        let mut model = init_model_with_resolution(0, 16);
        for l in &mut model.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let img = Image::filled(16, 16, 3, 0.4);
        // 0.5 is not > 0.5
        assert_eq!(segment_crop(&model, &img, 0.5).unwrap().count(), 0);
        assert_eq!(segment_crop(&model, &img, 1e-9).unwrap().count(), 256);
    }
}
