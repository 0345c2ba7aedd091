//! Synthetic upright silhouettes with known measurements.
//!
//! The torso width profile is built so that, under the configured line
//! placement rules, the planted waist row is the unique narrowest row of its
//! search window and the planted hip row the unique widest row of its
//! window. Arms hang as separate vertical strips joined to the torso only by
//! a shoulder block above the bust, so the central-run rule must ignore them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anthropometry::{ellipse_circumference, AnthroConfig, Convention, Measurements};
use crate::classifier::{classify, BodyShape};
use crate::error::{Error, Result};
use crate::inference::{Keypoint, KeypointKind, KeypointSet, LabelMap, NUM_KEYPOINTS, PERSON_CLASS};
use crate::ingest::{validate_height, HeightCm, MeasurementTruth, RgbImage};
use crate::pipeline::PipelineConfig;
use crate::silhouette::BinaryMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub image_width: u32,
    pub image_height: u32,
    /// Subject height in centimetres; sets the pixel scale with `stature_px`.
    pub height_cm: f64,
    /// Row of the top of the head.
    pub top_row: u32,
    /// Head-top to sole extent in pixels.
    pub stature_px: u32,
    pub center_col: u32,
    pub bust_row: u32,
    pub waist_row: u32,
    pub hip_row: u32,
    pub bust_width: u32,
    pub waist_width: u32,
    pub hip_width: u32,
    pub arm_gap: u32,
    pub arm_width: u32,
    pub head_radius: u32,
    pub leg_gap: u32,
}

/// Ground truth and rasters for one synthetic subject.
#[derive(Debug, Clone)]
pub struct SynthSubject {
    pub mask: BinaryMask,
    pub labels: LabelMap,
    pub keypoints: KeypointSet,
    pub height: HeightCm,
    pub truth: MeasurementTruth,
    pub measurements: Measurements,
    pub shape: BodyShape,
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InfeasibleParams(msg.into())
}

struct Layout {
    shoulder: f64,
    hip_joint: f64,
    block_top: u32,
    block_bottom: u32,
    crotch: u32,
    feet: u32,
    arm_bottom: u32,
    /// Torso width per row for rows `block_bottom + 1 ..= crotch`.
    torso: Vec<u32>,
    arm_inner: u32,
}

impl Layout {
    fn torso_width(&self, row: u32) -> u32 {
        self.torso[(row - self.block_bottom - 1) as usize]
    }
}

fn lerp(r: f64, (r0, w0): (f64, f64), (r1, w1): (f64, f64)) -> f64 {
    if r1 == r0 {
        return w1;
    }
    w0 + (w1 - w0) * (r - r0) / (r1 - r0)
}

fn layout(p: &SynthParams, cfg: &AnthroConfig) -> Result<Layout> {
    if p.bust_width == 0 || p.waist_width == 0 || p.hip_width == 0 {
        return Err(infeasible("torso widths must be positive"));
    }
    if !(p.bust_row < p.waist_row && p.waist_row < p.hip_row) {
        return Err(infeasible("rows must satisfy bust < waist < hip"));
    }
    if p.arm_gap == 0 {
        return Err(infeasible("arm gap 0 joins the arms to the torso"));
    }
    if p.arm_width == 0 || p.head_radius == 0 {
        return Err(infeasible("arm width and head radius must be positive"));
    }

    // keypoint rows that place the bust and waist exactly on the planted rows
    let span = f64::from(p.waist_row - p.bust_row) / (cfg.waist_fraction - cfg.bust_fraction);
    let shoulder = f64::from(p.bust_row) - cfg.bust_fraction * span;
    let hip_joint = shoulder + span;
    // recompute the way line placement does
    let span = hip_joint - shoulder;
    if (shoulder + cfg.bust_fraction * span).round() != f64::from(p.bust_row)
        || (shoulder + cfg.waist_fraction * span).round() != f64::from(p.waist_row)
    {
        return Err(infeasible("planted rows are not reproducible from keypoints"));
    }
    let half = (cfg.waist_search_halfwindow * span).round() as i64;
    let waist_lo = i64::from(p.waist_row) - half;
    let waist_hi = i64::from(p.waist_row) + half;
    let hip_lo = (hip_joint - cfg.hip_search_window_up * span).round() as i64;
    let hip_hi = (hip_joint + cfg.hip_search_window_down * span).round() as i64;
    let hip = i64::from(p.hip_row);
    if hip < hip_lo || hip > hip_hi {
        return Err(infeasible(format!(
            "hip row {hip} outside its search window [{hip_lo}, {hip_hi}]"
        )));
    }
    if waist_hi >= hip_lo {
        return Err(infeasible("waist and hip windows overlap"));
    }

    let block_half = ((0.04 * span).round() as u32).max(2);
    let shoulder_row = shoulder.floor() as i64;
    let block_top = shoulder_row - i64::from(block_half);
    let block_bottom = shoulder_row + i64::from(block_half);
    let head_bottom = i64::from(p.top_row) + 2 * i64::from(p.head_radius);
    if block_top <= head_bottom + 1 {
        return Err(infeasible("shoulders overlap the head"));
    }
    if block_bottom >= i64::from(p.bust_row) {
        return Err(infeasible("bust row falls inside the shoulder block"));
    }
    if block_bottom >= waist_lo {
        return Err(infeasible("waist window reaches the shoulder block"));
    }
    let crotch = hip_hi + 3;
    let feet = i64::from(p.top_row) + i64::from(p.stature_px) - 1;
    if crotch + 10 > feet {
        return Err(infeasible("stature too short for the planted rows"));
    }
    if feet >= i64::from(p.image_height) {
        return Err(infeasible("figure extends below the image"));
    }
    let (block_top, block_bottom, crotch, feet) =
        (block_top as u32, block_bottom as u32, crotch as u32, feet as u32);

    let (b, w, h) = (
        f64::from(p.bust_width),
        f64::from(p.waist_width),
        f64::from(p.hip_width),
    );
    let (br, wr, hr) = (
        f64::from(p.bust_row),
        f64::from(p.waist_row),
        f64::from(p.hip_row),
    );
    let mut torso = Vec::with_capacity((crotch - block_bottom) as usize);
    for row in block_bottom + 1..=crotch {
        let r = f64::from(row);
        let ri = i64::from(row);
        let base = if r <= br {
            b
        } else if r <= wr {
            lerp(r, (br, b), (wr, w))
        } else if r <= hr {
            lerp(r, (wr, w), (hr, h))
        } else {
            h - 2.0 * (r - hr)
        };
        let mut width = base.round() as i64;
        if (waist_lo..=waist_hi).contains(&ri) {
            width = if row == p.waist_row {
                i64::from(p.waist_width)
            } else {
                width.max(i64::from(p.waist_width) + 2 * (ri - i64::from(p.waist_row)).abs())
            };
        }
        if (hip_lo..=hip_hi).contains(&ri) {
            width = if ri == hip {
                i64::from(p.hip_width)
            } else {
                width.min(i64::from(p.hip_width) - 2 * (ri - hip).abs())
            };
        }
        if width < 4 {
            return Err(infeasible(format!("torso width collapses at row {row}")));
        }
        torso.push(width as u32);
    }
    let max_torso = *torso.iter().max().expect("torso has rows");
    let arm_inner = max_torso / 2 + 1 + p.arm_gap;
    let reach = arm_inner + p.arm_width;
    if p.center_col < reach + 1 || p.center_col + reach + 1 >= p.image_width {
        return Err(infeasible("arms extend beyond the image"));
    }
    if p.head_radius >= p.center_col || p.center_col + p.head_radius >= p.image_width {
        return Err(infeasible("head extends beyond the image"));
    }
    let arm_bottom = (p.hip_row + (0.1 * span).round() as u32).min(feet - 1);

    Ok(Layout {
        shoulder,
        hip_joint,
        block_top,
        block_bottom,
        crotch,
        feet,
        arm_bottom,
        torso,
        arm_inner,
    })
}

/// `[left, right]` columns of a run of `width` pixels centred on `cx`.
fn centred(cx: u32, width: u32) -> (u32, u32) {
    let left = cx - width / 2;
    (left, left + width - 1)
}

fn rasterize(p: &SynthParams, l: &Layout) -> BinaryMask {
    let cx = p.center_col;
    let r = i64::from(p.head_radius);
    let head_cy = i64::from(p.top_row) + r;
    let neck = centred(cx, p.head_radius.max(2));
    let outer = l.arm_inner + p.arm_width - 1;
    BinaryMask::from_fn(p.image_width, p.image_height, |x, y| {
        let (xi, yi) = (i64::from(x), i64::from(y));
        let dx = xi - i64::from(cx);
        if y < l.block_top {
            let dy = yi - head_cy;
            let in_head = y >= p.top_row && dx * dx + dy * dy <= r * r;
            let in_neck = yi > head_cy && x >= neck.0 && x <= neck.1;
            return in_head || in_neck;
        }
        if y <= l.block_bottom {
            return dx.unsigned_abs() as u32 <= outer;
        }
        let arm = y <= l.arm_bottom && {
            let d = dx.unsigned_abs() as u32;
            d >= l.arm_inner && d <= outer
        };
        if arm {
            return true;
        }
        if y <= l.crotch {
            let (left, right) = centred(cx, l.torso_width(y));
            return x >= left && x <= right;
        }
        if y <= l.feet {
            let (left, right) = centred(cx, *l.torso.last().expect("torso has rows"));
            let gap = centred(cx, p.leg_gap.max(1));
            return x >= left && x <= right && (x < gap.0 || x > gap.1);
        }
        false
    })
}

fn plant_keypoints(p: &SynthParams, l: &Layout) -> Result<KeypointSet> {
    let cx = f64::from(p.center_col);
    let r = f64::from(p.head_radius);
    let top = f64::from(p.top_row);
    let arm_mid = f64::from(l.arm_inner) + f64::from(p.arm_width) / 2.0;
    let leg = f64::from(*l.torso.last().expect("torso has rows")) / 4.0;
    let knee_y = (f64::from(l.crotch) + f64::from(l.feet)) / 2.0;
    let ankle_y = f64::from(l.feet) - 4.0;
    let shoulder_dx = f64::from(p.bust_width) / 2.0;
    let hip_dx = f64::from(p.hip_width) / 4.0;
    let elbow_y = (l.shoulder + f64::from(l.arm_bottom)) / 2.0;
    let wrist_y = f64::from(l.arm_bottom) - 3.0;

    use KeypointKind::*;
    let mut points = [Keypoint::default(); NUM_KEYPOINTS];
    let mut put = |kind: KeypointKind, x: f64, y: f64| {
        points[kind.index()] = Keypoint {
            x,
            y,
            confidence: 0.9,
        };
    };
    // COCO "left" is the subject's left, which appears on the image's right.
    put(Nose, cx, top + r);
    put(LeftEye, cx + r / 3.0, top + 0.8 * r);
    put(RightEye, cx - r / 3.0, top + 0.8 * r);
    put(LeftEar, cx + 0.9 * r, top + r);
    put(RightEar, cx - 0.9 * r, top + r);
    put(LeftShoulder, cx + shoulder_dx, l.shoulder);
    put(RightShoulder, cx - shoulder_dx, l.shoulder);
    put(LeftElbow, cx + arm_mid, elbow_y);
    put(RightElbow, cx - arm_mid, elbow_y);
    put(LeftWrist, cx + arm_mid, wrist_y);
    put(RightWrist, cx - arm_mid, wrist_y);
    put(LeftHip, cx + hip_dx, l.hip_joint);
    put(RightHip, cx - hip_dx, l.hip_joint);
    put(LeftKnee, cx + leg, knee_y);
    put(RightKnee, cx - leg, knee_y);
    put(LeftAnkle, cx + leg, ankle_y);
    put(RightAnkle, cx - leg, ankle_y);
    let set = KeypointSet::new(points)?;
    if !set.within(p.image_width, p.image_height) {
        return Err(infeasible("keypoints fall outside the image"));
    }
    Ok(set)
}

/// Rasterises `p` and derives its ground truth under `cfg`.
pub fn synth_silhouette(p: &SynthParams, cfg: &PipelineConfig) -> Result<SynthSubject> {
    let height = validate_height(p.height_cm).map_err(|e| infeasible(e.to_string()))?;
    let l = layout(p, &cfg.anthropometry)?;
    let mask = rasterize(p, &l);
    let keypoints = plant_keypoints(p, &l)?;
    let labels = LabelMap::new(
        p.image_width,
        p.image_height,
        mask.bits()
            .iter()
            .map(|&b| if b { PERSON_CLASS } else { 0 })
            .collect(),
    )?;

    let scale = height.value() / f64::from(p.stature_px);
    let truth = MeasurementTruth {
        bust: f64::from(p.bust_width) * scale,
        waist: f64::from(p.waist_width) * scale,
        hip: f64::from(p.hip_width) * scale,
    };
    let a = &cfg.anthropometry;
    let measurements = match a.convention {
        Convention::FrontalWidth => {
            Measurements::new(truth.bust, truth.waist, truth.hip, Convention::FrontalWidth)
        }
        Convention::EstCircumference => Measurements::new(
            ellipse_circumference(truth.bust, a.aspect_bust)?,
            ellipse_circumference(truth.waist, a.aspect_waist)?,
            ellipse_circumference(truth.hip, a.aspect_hip)?,
            Convention::EstCircumference,
        ),
    };
    let truth = MeasurementTruth {
        bust: measurements.bust,
        waist: measurements.waist,
        hip: measurements.hip,
    };
    let shape = classify(&measurements, &cfg.classifier)?;
    Ok(SynthSubject {
        mask,
        labels,
        keypoints,
        height,
        truth,
        measurements,
        shape,
    })
}

/// Nominal frontal widths (bust, waist, hip) in cm for each preset shape.
fn preset_widths_cm(shape: BodyShape) -> (f64, f64, f64) {
    match shape {
        BodyShape::Rectangle => (35.0, 32.0, 35.0),
        BodyShape::Triangle => (32.0, 31.0, 37.0),
        BodyShape::InvertedTriangle => (40.0, 33.0, 34.0),
        BodyShape::Spoon => (32.0, 28.0, 37.0),
        BodyShape::Hourglass => (36.0, 25.0, 36.5),
    }
}

impl SynthParams {
    /// Randomised upright figure whose frontal widths target `shape` under
    /// the default classifier thresholds. Widths jitter by up to 0.5 cm.
    pub fn preset(shape: BodyShape, cfg: &AnthroConfig, rng: &mut impl Rng) -> SynthParams {
        let stature_px: u32 = rng.gen_range(820..=920);
        let height_cm: f64 = (rng.gen_range(1500..=1950) as f64) / 10.0;
        let scale = height_cm / f64::from(stature_px);
        let top_row = rng.gen_range(30..=50);
        let st = f64::from(stature_px);
        let shoulder = f64::from(top_row) + 0.19 * st;
        let span = 0.29 * st;
        let hip_joint = shoulder + span;
        let bust_row = (shoulder + cfg.bust_fraction * span).round() as u32;
        let waist_row = (shoulder + cfg.waist_fraction * span).round() as u32;
        let hip_row = (hip_joint + 0.05 * span).round() as u32;

        let (b, w, h) = preset_widths_cm(shape);
        let mut px = |cm: f64| ((cm + rng.gen_range(-0.5..=0.5)) / scale).round() as u32;
        let (bust_width, waist_width, hip_width) = (px(b), px(w), px(h));
        SynthParams {
            image_width: 640,
            image_height: top_row + stature_px + 30,
            height_cm,
            top_row,
            stature_px,
            center_col: 320,
            bust_row,
            waist_row,
            hip_row,
            bust_width,
            waist_width,
            hip_width,
            arm_gap: rng.gen_range(6..=16),
            arm_width: rng.gen_range(24..=34),
            head_radius: (0.06 * st).round() as u32,
            leg_gap: rng.gen_range(8..=20),
        }
    }
}

/// Flat-colour rendering of a mask over a background mottled in 16 px
/// tiles, for fixture images that the replay backend pairs with recorded
/// outputs.
pub fn render_rgb(mask: &BinaryMask, rng: &mut impl Rng) -> Result<RgbImage> {
    const TILE: u32 = 16;
    let base: [u8; 3] = [rng.gen_range(90..160), rng.gen_range(90..160), rng.gen_range(90..160)];
    let tiles_x = mask.width().div_ceil(TILE);
    let tiles_y = mask.height().div_ceil(TILE);
    let shade: Vec<i16> = (0..tiles_x * tiles_y).map(|_| rng.gen_range(-12..=12)).collect();
    let raster = image::RgbImage::from_fn(mask.width(), mask.height(), |x, y| {
        if mask.get(x, y) {
            image::Rgb([40, 60, 150])
        } else {
            let n = shade[((y / TILE) * tiles_x + x / TILE) as usize];
            image::Rgb(base.map(|c| (i16::from(c) + n).clamp(0, 255) as u8))
        }
    });
    RgbImage::new(raster)
}
