//! Box arithmetic: expansion around the tracker box, minimum-threshold
//! clamping to the frame, tight-box refinement from a segmentation mask, and
//! the salient-size discriminant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Mask;

/// Axis-aligned rectangle: (x, y) is the upper-left corner, in real pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite())
        {
            return Err(Error::InvalidBox { w, h });
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection-over-union of two boxes in real coordinates.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }

    pub fn center_distance(&self, other: &BoundingBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }
}

/// Expansion factor, minimum crop side, and salient-size threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Expanding factor applied around the tracker box center.
    pub expand_factor: f64,
    /// Minimum crop side in pixels.
    pub min_crop_side: f64,
    /// Boxes with both sides >= this are salient.
    pub salient_side_threshold: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            expand_factor: 1.5,
            min_crop_side: 96.0,
            salient_side_threshold: 32.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.expand_factor < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "expand_factor {} must be >= 1",
                self.expand_factor
            )));
        }
        if self.min_crop_side < 1.0 || self.salient_side_threshold < 1.0 {
            return Err(Error::InvalidConfig(
                "min_crop_side and salient_side_threshold must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Scales the box by `factor` about its center.
pub fn expand(b: &BoundingBox, factor: f64) -> Result<BoundingBox> {
    if factor < 1.0 {
        return Err(Error::ExpandFactorBelowOne(factor));
    }
    Ok(BoundingBox {
        x: b.x - (factor - 1.0) * b.w / 2.0,
        y: b.y - (factor - 1.0) * b.h / 2.0,
        w: factor * b.w,
        h: factor * b.h,
    })
}

/// Clamps an expanded box to the frame with a minimum side: sides below
/// `min_side` grow to it, sides above the frame shrink to the frame, negative
/// origins snap to 0, and any right/bottom overflow shifts the box back
/// inside.
pub fn clamp_min(
    b: &BoundingBox,
    frame_w: usize,
    frame_h: usize,
    min_side: f64,
) -> Result<BoundingBox> {
    let (fw, fh) = (frame_w as f64, frame_h as f64);
    if min_side > fw || min_side > fh {
        return Err(Error::ThresholdExceedsFrame {
            tr: min_side,
            width: frame_w,
            height: frame_h,
        });
    }
    let w = if b.w > fw {
        fw
    } else if b.w < min_side {
        min_side
    } else {
        b.w
    };
    let h = if b.h > fh {
        fh
    } else if b.h < min_side {
        min_side
    } else {
        b.h
    };
    let mut x = b.x.max(0.0);
    let mut y = b.y.max(0.0);
    if x + w > fw {
        x = fw - w;
    }
    if y + h > fh {
        y = fh - h;
    }
    Ok(BoundingBox { x, y, w, h })
}

/// Tight box of the mask foreground, translated by the crop origin. Widths
/// are pixel-inclusive: a single foreground pixel yields a 1×1 box.
pub fn refine_from_mask(mask: &Mask, origin: (f64, f64)) -> Result<BoundingBox> {
    let mut left = usize::MAX;
    let mut right = 0usize;
    let mut top = usize::MAX;
    let mut bottom = 0usize;
    let mut any = false;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                any = true;
                left = left.min(x);
                right = right.max(x);
                top = top.min(y);
                bottom = bottom.max(y);
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(BoundingBox {
        x: origin.0 + left as f64,
        y: origin.1 + top as f64,
        w: (right - left + 1) as f64,
        h: (bottom - top + 1) as f64,
    })
}

/// A box is salient when both sides reach the threshold (inclusive).
pub fn is_salient_box(b: &BoundingBox, side_threshold: f64) -> bool {
    b.w >= side_threshold && b.h >= side_threshold
}
