//! Bust, waist and hip measurement rows and their centimetre values.
//!
//! Rows are placed relative to the shoulder-to-hip keypoint span: the bust at
//! a fixed fraction of the span, the waist at the narrowest torso row in a
//! window around its nominal fraction, and the hip at the widest row in a
//! window around the hip joints.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{KeypointKind, KeypointSet, DEFAULT_KEYPOINT_THRESHOLD};
use crate::ingest::HeightCm;
use crate::silhouette::{central_row_span_at, mask_height_px, BinaryMask, RowSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Frontal silhouette width.
    FrontalWidth,
    /// Ellipse perimeter estimated from the width and a depth/width ratio.
    EstCircumference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub bust: f64,
    pub waist: f64,
    pub hip: f64,
    pub convention: Convention,
}

impl Measurements {
    pub fn new(bust: f64, waist: f64, hip: f64, convention: Convention) -> Self {
        Self {
            bust,
            waist,
            hip,
            convention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnthroConfig {
    pub bust_fraction: f64,
    pub waist_fraction: f64,
    pub waist_search_halfwindow: f64,
    pub hip_search_window_up: f64,
    pub hip_search_window_down: f64,
    pub aspect_bust: f64,
    pub aspect_waist: f64,
    pub aspect_hip: f64,
    pub convention: Convention,
    /// Minimum confidence for shoulder and hip keypoints.
    pub keypoint_threshold: f64,
}

impl Default for AnthroConfig {
    fn default() -> Self {
        Self {
            bust_fraction: 0.31,
            waist_fraction: 0.62,
            waist_search_halfwindow: 0.10,
            hip_search_window_up: 0.05,
            hip_search_window_down: 0.15,
            aspect_bust: 0.70,
            aspect_waist: 0.75,
            aspect_hip: 0.80,
            convention: Convention::FrontalWidth,
            keypoint_threshold: DEFAULT_KEYPOINT_THRESHOLD,
        }
    }
}

fn check_aspect(aspect: f64) -> Result<()> {
    if aspect > 0.3 && aspect <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "depth/width ratio {aspect} outside (0.3, 1.0]"
        )))
    }
}

impl AnthroConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        unit("bust_fraction", self.bust_fraction)?;
        unit("waist_fraction", self.waist_fraction)?;
        unit("waist_search_halfwindow", self.waist_search_halfwindow)?;
        unit("hip_search_window_up", self.hip_search_window_up)?;
        unit("hip_search_window_down", self.hip_search_window_down)?;
        if self.bust_fraction >= self.waist_fraction - self.waist_search_halfwindow {
            return Err(Error::InvalidConfig(
                "bust_fraction must lie above the waist search window".into(),
            ));
        }
        if self.waist_fraction + self.waist_search_halfwindow >= 1.0 - self.hip_search_window_up {
            return Err(Error::InvalidConfig(
                "waist and hip search windows overlap".into(),
            ));
        }
        for a in [self.aspect_bust, self.aspect_waist, self.aspect_hip] {
            check_aspect(a).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.keypoint_threshold) {
            return Err(Error::InvalidConfig(
                "keypoint_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Centimetres per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PxToCm {
    pub scale: f64,
}

pub fn px_to_cm(height: HeightCm, mask: &BinaryMask) -> Result<PxToCm> {
    let px = mask_height_px(mask)?;
    Ok(PxToCm {
        scale: height.value() / f64::from(px),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyLines {
    pub bust: RowSpan,
    pub waist: RowSpan,
    pub hip: RowSpan,
}

impl BodyLines {
    pub fn rows(&self) -> [u32; 3] {
        [self.bust.row, self.waist.row, self.hip.row]
    }
}

/// Scans rows `lo..=hi` and keeps the best-scoring central span. Ties go to
/// the row closest to `center`, then the smaller row. Rows without
/// foreground are skipped.
fn search_window(
    mask: &BinaryMask,
    centroid: f64,
    lo: i64,
    hi: i64,
    center: f64,
    better: impl Fn(u32, u32) -> bool,
) -> Option<RowSpan> {
    let lo = lo.max(0);
    let hi = hi.min(i64::from(mask.height()) - 1);
    let mut best: Option<RowSpan> = None;
    for row in lo..=hi {
        let Some(span) = central_row_span_at(mask, row as u32, centroid) else {
            continue;
        };
        best = match best {
            None => Some(span),
            Some(b) if better(span.width_px, b.width_px) => Some(span),
            Some(b) if span.width_px == b.width_px => {
                let (d_new, d_old) = (
                    (f64::from(span.row) - center).abs(),
                    (f64::from(b.row) - center).abs(),
                );
                // rows are visited in increasing order, so keep `b` on equal distance
                if d_new < d_old {
                    Some(span)
                } else {
                    Some(b)
                }
            }
            keep => keep,
        };
    }
    best
}

pub fn locate_lines(kp: &KeypointSet, mask: &BinaryMask, cfg: &AnthroConfig) -> Result<BodyLines> {
    kp.require_torso(cfg.keypoint_threshold)?;
    let shoulder =
        (kp.get(KeypointKind::LeftShoulder).y + kp.get(KeypointKind::RightShoulder).y) / 2.0;
    let hip = (kp.get(KeypointKind::LeftHip).y + kp.get(KeypointKind::RightHip).y) / 2.0;
    if shoulder >= hip {
        return Err(Error::UpsideDown { shoulder, hip });
    }
    let span = hip - shoulder;
    let centroid = mask.centroid_column()?;

    let bust_row = (shoulder + cfg.bust_fraction * span).round() as i64;
    let bust = u32::try_from(bust_row)
        .ok()
        .and_then(|r| central_row_span_at(mask, r, centroid))
        .ok_or(Error::LineOutsideMask {
            line: "bust",
            row: bust_row,
        })?;

    let waist_center = (shoulder + cfg.waist_fraction * span).round() as i64;
    let half = (cfg.waist_search_halfwindow * span).round() as i64;
    let waist = search_window(
        mask,
        centroid,
        waist_center - half,
        waist_center + half,
        waist_center as f64,
        |new, old| new < old,
    )
    .ok_or(Error::LineOutsideMask {
        line: "waist",
        row: waist_center,
    })?;

    let hip_lo = (hip - cfg.hip_search_window_up * span).round() as i64;
    let hip_hi = (hip + cfg.hip_search_window_down * span).round() as i64;
    let hip_line = search_window(
        mask,
        centroid,
        hip_lo,
        hip_hi,
        (hip_lo + hip_hi) as f64 / 2.0,
        |new, old| new > old,
    )
    .ok_or(Error::LineOutsideMask {
        line: "hip",
        row: hip.round() as i64,
    })?;

    if !(bust.row < waist.row && waist.row < hip_line.row) {
        return Err(Error::LinesOutOfOrder {
            bust: bust.row as usize,
            waist: waist.row as usize,
            hip: hip_line.row as usize,
        });
    }
    Ok(BodyLines {
        bust,
        waist,
        hip: hip_line,
    })
}

/// Ramanujan's first approximation of the perimeter of an ellipse with
/// semi-axes `width/2` and `aspect * width/2`.
pub fn ellipse_circumference(width_cm: f64, aspect: f64) -> Result<f64> {
    if !(width_cm.is_finite() && width_cm > 0.0) {
        return Err(Error::InvalidInput(format!("width {width_cm} must be > 0")));
    }
    check_aspect(aspect)?;
    let a = width_cm / 2.0;
    let b = aspect * a;
    Ok(PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt()))
}

pub fn measure(lines: &BodyLines, scale: PxToCm, cfg: &AnthroConfig) -> Result<Measurements> {
    if !(scale.scale.is_finite() && scale.scale > 0.0) {
        return Err(Error::InvalidInput(format!("scale {} must be > 0", scale.scale)));
    }
    let width = |span: &RowSpan| -> Result<f64> {
        if span.width_px == 0 {
            return Err(Error::InvalidInput(format!("zero-width span on row {}", span.row)));
        }
        Ok(f64::from(span.width_px) * scale.scale)
    };
    let (b, w, h) = (width(&lines.bust)?, width(&lines.waist)?, width(&lines.hip)?);
    Ok(match cfg.convention {
        Convention::FrontalWidth => Measurements::new(b, w, h, Convention::FrontalWidth),
        Convention::EstCircumference => Measurements::new(
            ellipse_circumference(b, cfg.aspect_bust)?,
            ellipse_circumference(w, cfg.aspect_waist)?,
            ellipse_circumference(h, cfg.aspect_hip)?,
            Convention::EstCircumference,
        ),
    })
}
