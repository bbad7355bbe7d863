//! Raster primitives shared by every other module: images, masks, scalar
//! maps, cropping, resizing, grayscale conversion, 2-D DFTs and Gaussian
//! smoothing.
//!
//! Pixel values are 64-bit reals in [0, 1]; 8-bit files are mapped by v/255
//! on load and round(v * 255) on save, so no downstream formula has to think
//! about quantization.

mod blur;
mod fft;
mod png;

pub use blur::gaussian_blur;
pub use fft::{dft2, idft2, idft2_complex};
pub use png::{load_image, load_mask, save_image, save_mask};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// H×W×C raster of real-valued pixels in [0, 1], row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// H×W grid of real values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// H×W grid of booleans, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

/// H×W grid of complex values, row-major. Frequency-domain intermediate for
/// the correlation filter and spectral-residual saliency.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<rustfft::num_complex::Complex64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(Error::BadRasterLength {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Image { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BadRasterLength {
                width,
                height,
                channels: 1,
                got: data.len(),
            });
        }
        Ok(ScalarMap { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ScalarMap { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BadRasterLength {
                width,
                height,
                channels: 1,
                got: data.len(),
            });
        }
        Ok(Mask { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl ComplexGrid {
    pub fn zeros(width: usize, height: usize) -> Self {
        ComplexGrid {
            width,
            height,
            data: vec![rustfft::num_complex::Complex64::new(0.0, 0.0); width * height],
        }
    }
}

/// ITU-R BT.601 luma; pass-through for single-channel images.
pub fn to_grayscale(img: &Image) -> Result<ScalarMap> {
    match img.channels {
        1 => Ok(ScalarMap {
            width: img.width,
            height: img.height,
            data: img.data.clone(),
        }),
        3 => {
            let data = img
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect();
            Ok(ScalarMap { width: img.width, height: img.height, data })
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// Rasterizes a box per the fixed convention: round origin to nearest
/// integer, round sides to nearest integer with minimum 1.
pub fn rasterize_box(b: &BoundingBox) -> (i64, i64, usize, usize) {
    let x = b.x.round() as i64;
    let y = b.y.round() as i64;
    let w = (b.w.round() as i64).max(1) as usize;
    let h = (b.h.round() as i64).max(1) as usize;
    (x, y, w, h)
}

/// Extracts the sub-raster under the rasterized box. The rasterized box must
/// lie fully within the image.
pub fn crop(img: &Image, b: &BoundingBox) -> Result<Image> {
    let (x, y, w, h) = rasterize_box(b);
    if x < 0 || y < 0 || x as usize + w > img.width || y as usize + h > img.height {
        return Err(Error::BoxOutOfBounds {
            x,
            y,
            w,
            h,
            width: img.width,
            height: img.height,
        });
    }
    let (x, y) = (x as usize, y as usize);
    let c = img.channels;
    let mut data = Vec::with_capacity(w * h * c);
    for row in y..y + h {
        let start = (row * img.width + x) * c;
        data.extend_from_slice(&img.data[start..start + w * c]);
    }
    Ok(Image { width: w, height: h, channels: c, data })
}

/// Crop with replicate padding: parts of the rasterized box outside the image
/// take the nearest edge pixel. Used by the tracker search window, which may
/// extend past frame bounds.
pub fn crop_replicate(img: &Image, b: &BoundingBox) -> Image {
    let (x, y, w, h) = rasterize_box(b);
    let c = img.channels;
    let mut data = Vec::with_capacity(w * h * c);
    for j in 0..h as i64 {
        let sy = (y + j).clamp(0, img.height as i64 - 1) as usize;
        for i in 0..w as i64 {
            let sx = (x + i).clamp(0, img.width as i64 - 1) as usize;
            for ch in 0..c {
                data.push(img.get(sx, sy, ch));
            }
        }
    }
    Image { width: w, height: h, channels: c, data }
}

/// Replicate-padded crop for scalar maps; see [`crop_replicate`].
pub fn crop_replicate_map(map: &ScalarMap, b: &BoundingBox) -> ScalarMap {
    let (x, y, w, h) = rasterize_box(b);
    let mut data = Vec::with_capacity(w * h);
    for j in 0..h as i64 {
        let sy = (y + j).clamp(0, map.height as i64 - 1) as usize;
        for i in 0..w as i64 {
            let sx = (x + i).clamp(0, map.width as i64 - 1) as usize;
            data.push(map.get(sx, sy));
        }
    }
    ScalarMap { width: w, height: h, data }
}

/// Corner-aligned source coordinate for destination index `i`.
#[inline]
fn src_coord(i: usize, src: usize, dst: usize) -> f64 {
    if dst <= 1 {
        0.0
    } else {
        i as f64 * (src - 1) as f64 / (dst - 1) as f64
    }
}

/// Bilinear resize with corner-aligned sampling (first/last sample at raster
/// corners). Output stays in the input value range.
pub fn resize_bilinear(img: &Image, w: usize, h: usize) -> Result<Image> {
    if w == 0 || h == 0 {
        return Err(Error::ZeroResizeDim);
    }
    let c = img.channels;
    let mut data = Vec::with_capacity(w * h * c);
    for j in 0..h {
        let fy = src_coord(j, img.height, h);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - y0 as f64;
        for i in 0..w {
            let fx = src_coord(i, img.width, w);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let tx = fx - x0 as f64;
            for ch in 0..c {
                let v00 = img.get(x0, y0, ch);
                let v10 = img.get(x1, y0, ch);
                let v01 = img.get(x0, y1, ch);
                let v11 = img.get(x1, y1, ch);
                let top = v00 + (v10 - v00) * tx;
                let bot = v01 + (v11 - v01) * tx;
                data.push(top + (bot - top) * ty);
            }
        }
    }
    Ok(Image { width: w, height: h, channels: c, data })
}

pub fn resize_map_bilinear(map: &ScalarMap, w: usize, h: usize) -> Result<ScalarMap> {
    let img = Image {
        width: map.width,
        height: map.height,
        channels: 1,
        data: map.data.clone(),
    };
    let out = resize_bilinear(&img, w, h)?;
    Ok(ScalarMap { width: w, height: h, data: out.data })
}

/// Nearest-neighbour resize for masks; only values present in the input can
/// appear in the output.
pub fn resize_mask_nearest(mask: &Mask, w: usize, h: usize) -> Result<Mask> {
    if w == 0 || h == 0 {
        return Err(Error::ZeroResizeDim);
    }
    let mut data = Vec::with_capacity(w * h);
    for j in 0..h {
        let sy = src_coord(j, mask.height, h).round() as usize;
        let sy = sy.min(mask.height - 1);
        for i in 0..w {
            let sx = src_coord(i, mask.width, w).round() as usize;
            let sx = sx.min(mask.width - 1);
            data.push(mask.get(sx, sy));
        }
    }
    Ok(Mask { width: w, height: h, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, vals: &[f64]) -> Image {
        Image::new(w, h, 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn grayscale_passes_through_single_channel() {
        let img = gray(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let sm = to_grayscale(&img).unwrap();
        assert_eq!(sm.data, img.data);
    }

    #[test]
    fn grayscale_weights() {
        let img = Image::new(2, 1, 3, vec![0.5, 0.5, 0.5, 1.0, 0.0, 0.0]).unwrap();
        let sm = to_grayscale(&img).unwrap();
        assert!((sm.data[0] - 0.5).abs() < 1e-12);
        assert!((sm.data[1] - 0.299).abs() < 1e-12);
    }

    #[test]
    fn crop_full_frame_is_identity() {
        let img = gray(3, 2, &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let out = crop(&img, &BoundingBox::new(0.0, 0.0, 3.0, 2.0).unwrap()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_single_pixel() {
        let img = gray(3, 2, &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let out = crop(&img, &BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(out.data, vec![0.0]);
    }

    #[test]
    fn crop_rounds_fractional_boxes() {
        let img = Image::filled(10, 10, 1, 0.5);
        let out = crop(&img, &BoundingBox::new(2.4, 2.6, 3.2, 3.1).unwrap()).unwrap();
        // raster (2, 3, 3, 3)
        assert_eq!((out.width, out.height), (3, 3));
    }

    #[test]
    fn crop_rejects_out_of_bounds() {
        let img = Image::filled(4, 4, 1, 0.0);
        assert!(crop(&img, &BoundingBox::new(3.0, 3.0, 4.0, 4.0).unwrap()).is_err());
        assert!(crop(&img, &BoundingBox::new(10.0, 10.0, 2.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn crop_composes() {
        let img = gray(6, 6, &(0..36).map(|v| v as f64 / 35.0).collect::<Vec<_>>());
        let b1 = BoundingBox::new(1.0, 2.0, 4.0, 3.0).unwrap();
        let b2 = BoundingBox::new(2.0, 1.0, 2.0, 2.0).unwrap();
        let nested = crop(&crop(&img, &b1).unwrap(), &b2).unwrap();
        let composed = crop(&img, &BoundingBox::new(3.0, 3.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!(nested, composed);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = gray(2, 2, &[0.3, 0.3, 0.3, 0.3]);
        let same = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(same, img);
        let up = resize_bilinear(&img, 5, 7).unwrap();
        assert!(up.data.iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn resize_corner_aligned_example() {
        let img = gray(2, 1, &[0.0, 1.0]);
        let out = resize_bilinear(&img, 3, 1).unwrap();
        assert_eq!(out.data, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn resize_rejects_zero_dim() {
        let img = Image::filled(2, 2, 1, 0.0);
        assert!(resize_bilinear(&img, 0, 2).is_err());
    }

    #[test]
    fn nearest_mask_resize_preserves_values() {
        let mask = Mask::new(2, 2, vec![true, false, false, true]).unwrap();
        let out = resize_mask_nearest(&mask, 5, 5).unwrap();
        assert_eq!(out.count() + out.data.iter().filter(|&&b| !b).count(), 25);
    }
}
