//! Separable Gaussian smoothing with replicated edges.

use crate::error::{Error, Result};

use super::ScalarMap;

/// Discrete Gaussian kernel with radius ⌈3σ⌉, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

fn convolve_axis(map: &ScalarMap, kernel: &[f64], horizontal: bool) -> ScalarMap {
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = (map.width as i64, map.height as i64);
    let mut out = ScalarMap::filled(map.width, map.height, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let off = i as i64 - radius;
                let (sx, sy) = if horizontal {
                    ((x + off).clamp(0, w - 1), y)
                } else {
                    (x, (y + off).clamp(0, h - 1))
                };
                acc += k * map.get(sx as usize, sy as usize);
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    out
}

/// Separable Gaussian blur; sigma 0 is the identity.
pub fn gaussian_blur(map: &ScalarMap, sigma: f64) -> Result<ScalarMap> {
    if sigma < 0.0 {
        return Err(Error::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let pass = convolve_axis(map, &kernel, true);
    Ok(convolve_axis(&pass, &kernel, false))
}
