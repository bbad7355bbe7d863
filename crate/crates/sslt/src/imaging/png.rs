//! PNG read/write: 8-bit gray or RGB for images, {0, 255} gray for masks.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

use super::{Image, Mask};

pub fn load_image(path: &Path) -> Result<Image> {
    let dynimg = image::open(path).map_err(|e| Error::png(path, e))?;
    let img = match dynimg {
        DynamicImage::ImageLuma8(g) => Image {
            width: g.width() as usize,
            height: g.height() as usize,
            channels: 1,
            data: g.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        },
        other => {
            let rgb = other.to_rgb8();
            Image {
                width: rgb.width() as usize,
                height: rgb.height() as usize,
                channels: 3,
                data: rgb.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
            }
        }
    };
    Ok(img)
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let (w, h) = (img.width as u32, img.height as u32);
    match img.channels {
        1 => GrayImage::from_raw(w, h, bytes)
            .expect("raster length checked by Image invariant")
            .save(path)
            .map_err(|e| Error::png(path, e)),
        3 => RgbImage::from_raw(w, h, bytes)
            .expect("raster length checked by Image invariant")
            .save(path)
            .map_err(|e| Error::png(path, e)),
        c => Err(Error::UnsupportedChannels(c)),
    }
}

/// Loads a mask PNG; any pixel value > 127 is foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let g = image::open(path).map_err(|e| Error::png(path, e))?.to_luma8();
    Ok(Mask {
        width: g.width() as usize,
        height: g.height() as usize,
        data: g.as_raw().iter().map(|&v| v > 127).collect(),
    })
}

pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width as u32, mask.height as u32, bytes)
        .expect("raster length checked by Mask invariant")
        .save(path)
        .map_err(|e| Error::png(path, e))
}
