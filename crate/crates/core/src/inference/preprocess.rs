//! Tensor preparation and output mapping for the model-file backend.
//!
//! Pixel index `i` has its centre at coordinate `i`; crop rectangles are
//! expressed in edge coordinates where pixel `i` spans `[i, i + 1)`.

use image::imageops::{self, FilterType};

use super::{Affine2, BoundingBox, Keypoint, KeypointSet};
use crate::ingest::RgbImage;

pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

pub const SEGMENTATION_LONG_SIDE: u32 = 513;
pub const KEYPOINT_INPUT_WIDTH: u32 = 288;
pub const KEYPOINT_INPUT_HEIGHT: u32 = 384;
/// Fraction of the person box added on each side before padding to 3:4.
pub const KEYPOINT_BOX_MARGIN: f64 = 0.25;

/// Size after scaling the longest side to `long_side`, preserving aspect.
pub fn fit_long_side(width: u32, height: u32, long_side: u32) -> (u32, u32) {
    let scale = f64::from(long_side) / f64::from(width.max(height));
    let w = (f64::from(width) * scale).round().max(1.0) as u32;
    let h = (f64::from(height) * scale).round().max(1.0) as u32;
    (w, h)
}

fn normalize(rgb: [u8; 3], out: &mut [f32], plane: usize, at: usize) {
    for c in 0..3 {
        out[c * plane + at] = (f32::from(rgb[c]) / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
    }
}

/// Segmentation input: bilinear resize to the long side, then ImageNet
/// normalisation in NCHW order. Returns `(width, height, tensor)`.
pub fn segmentation_tensor(image: &RgbImage) -> (u32, u32, Vec<f32>) {
    let (w, h) = fit_long_side(image.width(), image.height(), SEGMENTATION_LONG_SIDE);
    let resized = imageops::resize(image.raster(), w, h, FilterType::Triangle);
    let plane = (w * h) as usize;
    let mut out = vec![0.0; 3 * plane];
    for (i, px) in resized.pixels().enumerate() {
        normalize(px.0, &mut out, plane, i);
    }
    (w, h, out)
}

/// Per-pixel argmax over `classes` logit planes (CHW); first maximum wins.
pub fn argmax_labels(logits: &[f32], classes: usize, width: usize, height: usize) -> Vec<u8> {
    let plane = width * height;
    assert_eq!(logits.len(), classes * plane, "logit tensor shape");
    (0..plane)
        .map(|i| {
            let mut best = 0;
            for c in 1..classes {
                if logits[c * plane + i] > logits[best * plane + i] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}

/// Nearest-neighbour resampling of a label grid.
pub fn upsample_nearest(labels: &[u8], src_w: u32, src_h: u32, dst_w: u32, dst_h: u32) -> Vec<u8> {
    let pick = |dst: u32, src_len: u32, dst_len: u32| -> usize {
        let s = ((f64::from(dst) + 0.5) * f64::from(src_len) / f64::from(dst_len)).floor() as u32;
        s.min(src_len - 1) as usize
    };
    let cols: Vec<usize> = (0..dst_w).map(|x| pick(x, src_w, dst_w)).collect();
    let mut out = Vec::with_capacity(dst_w as usize * dst_h as usize);
    for y in 0..dst_h {
        let row = pick(y, src_h, dst_h) * src_w as usize;
        out.extend(cols.iter().map(|&c| labels[row + c]));
    }
    out
}

/// Keypoint-model crop window in edge coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointCrop {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl KeypointCrop {
    /// Person box grown by 25% on each side, then padded about its centre
    /// to a 3:4 (width:height) aspect.
    pub fn from_person_box(b: &BoundingBox) -> Self {
        let cx = (f64::from(b.left) + f64::from(b.right) + 1.0) / 2.0;
        let cy = (f64::from(b.top) + f64::from(b.bottom) + 1.0) / 2.0;
        let grow = 1.0 + 2.0 * KEYPOINT_BOX_MARGIN;
        let mut width = f64::from(b.width()) * grow;
        let mut height = f64::from(b.height()) * grow;
        let aspect = f64::from(KEYPOINT_INPUT_WIDTH) / f64::from(KEYPOINT_INPUT_HEIGHT);
        if width / height > aspect {
            height = width / aspect;
        } else {
            width = height * aspect;
        }
        Self {
            x0: cx - width / 2.0,
            y0: cy - height / 2.0,
            width,
            height,
        }
    }

    /// Maps cell centres of a `grid_w` x `grid_h` grid laid over the crop to
    /// source pixel-index coordinates.
    pub fn grid_to_image(&self, grid_w: usize, grid_h: usize) -> Affine2 {
        let sx = self.width / grid_w as f64;
        let sy = self.height / grid_h as f64;
        Affine2::scale_translate(sx, sy, self.x0 + 0.5 * sx - 0.5, self.y0 + 0.5 * sy - 0.5)
    }

    /// Bilinear sample of the crop at the keypoint input size, zero outside
    /// the image, ImageNet-normalised, NCHW.
    pub fn tensor(&self, image: &RgbImage) -> Vec<f32> {
        let (ow, oh) = (KEYPOINT_INPUT_WIDTH as usize, KEYPOINT_INPUT_HEIGHT as usize);
        let map = self.grid_to_image(ow, oh);
        let raster = image.raster();
        let (w, h) = (raster.width() as i64, raster.height() as i64);
        let fetch = |x: i64, y: i64, c: usize| -> f64 {
            if x < 0 || y < 0 || x >= w || y >= h {
                0.0
            } else {
                f64::from(raster.get_pixel(x as u32, y as u32).0[c])
            }
        };
        let plane = ow * oh;
        let mut out = vec![0.0; 3 * plane];
        for v in 0..oh {
            for u in 0..ow {
                let (xs, ys) = map.apply(u as f64, v as f64);
                let (xf, yf) = (xs.floor(), ys.floor());
                let (tx, ty) = (xs - xf, ys - yf);
                let (xi, yi) = (xf as i64, yf as i64);
                let mut rgb = [0u8; 3];
                for (c, channel) in rgb.iter_mut().enumerate() {
                    let top = fetch(xi, yi, c) * (1.0 - tx) + fetch(xi + 1, yi, c) * tx;
                    let bottom = fetch(xi, yi + 1, c) * (1.0 - tx) + fetch(xi + 1, yi + 1, c) * tx;
                    *channel = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
                }
                normalize(rgb, &mut out, plane, v * ow + u);
            }
        }
        out
    }
}

/// Clamps every keypoint into `[0, width-1] x [0, height-1]`.
pub fn clamp_to_image(kp: &KeypointSet, width: u32, height: u32) -> KeypointSet {
    let (w, h) = (f64::from(width) - 1.0, f64::from(height) - 1.0);
    let points = kp.points().map(|p| Keypoint {
        x: p.x.clamp(0.0, w),
        y: p.y.clamp(0.0, h),
        confidence: p.confidence,
    });
    KeypointSet::new(points).expect("clamping keeps keypoints valid")
}
