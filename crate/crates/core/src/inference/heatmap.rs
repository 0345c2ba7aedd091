use serde::{Deserialize, Serialize};

use super::{Keypoint, KeypointSet, NUM_KEYPOINTS};
use crate::error::{Error, Result};

/// `(x, y) -> (a*x + b*y + c, d*x + e*y + f)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
    };

    pub fn scale_translate(sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        Affine2 {
            a: sx,
            b: 0.0,
            c: tx,
            d: 0.0,
            e: sy,
            f: ty,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.c,
            self.d * x + self.e * y + self.f,
        )
    }
}

/// One activation grid per COCO keypoint, row-major, plus the grid-to-image
/// transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmaps {
    width: usize,
    height: usize,
    channels: Vec<Vec<f32>>,
    transform: Affine2,
}

impl Heatmaps {
    pub fn new(
        width: usize,
        height: usize,
        channels: Vec<Vec<f32>>,
        transform: Affine2,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("empty heatmap grid".into()));
        }
        if channels.len() != NUM_KEYPOINTS {
            return Err(Error::InvalidInput(format!(
                "expected {NUM_KEYPOINTS} heatmap channels, got {}",
                channels.len()
            )));
        }
        for (i, ch) in channels.iter().enumerate() {
            if ch.len() != width * height {
                return Err(Error::InvalidInput(format!(
                    "heatmap channel {i} has {} cells, expected {}",
                    ch.len(),
                    width * height
                )));
            }
            if ch.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "heatmap channel {i} has negative or non-finite activations"
                )));
            }
        }
        let det = transform.determinant();
        if !(det.is_finite() && det != 0.0) {
            return Err(Error::InvalidInput("heatmap transform is not invertible".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            transform,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn transform(&self) -> Affine2 {
        self.transform
    }

    /// Same grids with every activation multiplied by `k`.
    pub fn scaled(&self, k: f32) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|ch| ch.iter().map(|v| v * k).collect())
            .collect();
        Heatmaps::new(self.width, self.height, channels, self.transform)
    }
}

/// Quarter-cell shift toward the larger neighbour. A missing neighbour (grid
/// edge) loses; equal neighbours resolve toward the +1 side, which is
/// compared first.
fn quarter_shift(lower: Option<f32>, upper: Option<f32>) -> f64 {
    match (lower, upper) {
        (None, None) => 0.0,
        (Some(_), None) => -0.25,
        (None, Some(_)) => 0.25,
        (Some(lo), Some(hi)) => {
            if hi >= lo {
                0.25
            } else {
                -0.25
            }
        }
    }
}

struct Peak {
    x: f64,
    y: f64,
    value: f32,
    degenerate: bool,
}

fn locate_peak(grid: &[f32], width: usize, height: usize) -> Peak {
    let mut best = 0;
    let mut lowest = grid[0];
    for (i, &v) in grid.iter().enumerate() {
        if v > grid[best] {
            best = i;
        }
        if v < lowest {
            lowest = v;
        }
    }
    let (px, py) = (best % width, best / width);
    let at = |x: usize, y: usize| grid[y * width + x];
    let dx = quarter_shift(
        (px > 0).then(|| at(px - 1, py)),
        (px + 1 < width).then(|| at(px + 1, py)),
    );
    let dy = quarter_shift(
        (py > 0).then(|| at(px, py - 1)),
        (py + 1 < height).then(|| at(px, py + 1)),
    );
    Peak {
        x: px as f64 + dx,
        y: py as f64 + dy,
        value: grid[best],
        degenerate: lowest == grid[best],
    }
}

/// Argmax per channel (first occurrence in row-major order), refined by a
/// quarter-cell shift per axis and mapped through the grid transform.
///
/// A flat channel has no unique peak; it decodes at the first cell with
/// confidence 0.
pub fn decode_heatmaps(h: &Heatmaps) -> KeypointSet {
    let points = std::array::from_fn(|i| {
        let peak = locate_peak(&h.channels[i], h.width, h.height);
        let (x, y) = h.transform.apply(peak.x, peak.y);
        let confidence = if peak.degenerate {
            0.0
        } else {
            f64::from(peak.value).clamp(0.0, 1.0)
        };
        Keypoint { x, y, confidence }
    });
    KeypointSet::new(points).expect("decoded keypoints are finite with confidence in [0, 1]")
}
