//! JSON documents written by `bodyshape classify`.

use std::collections::BTreeMap;

use bodyshape::classifier::RuleTrace;
use bodyshape::inference::BackendInfo;
use bodyshape::silhouette::RowSpan;
use bodyshape::{Analysis, Convention, Error, ErrorClass};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct MeasurementsCm {
    pub bust: f64,
    pub waist: f64,
    pub hip: f64,
    pub convention: Convention,
}

#[derive(Debug, Serialize)]
pub struct Line {
    pub row: u32,
    pub left: u32,
    pub right: u32,
    pub width_px: u32,
}

impl From<&RowSpan> for Line {
    fn from(s: &RowSpan) -> Self {
        Line {
            row: s.row,
            left: s.left,
            right: s.right,
            width_px: s.width_px,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Lines {
    pub bust: Line,
    pub waist: Line,
    pub hip: Line,
}

#[derive(Debug, Serialize)]
pub struct Backend {
    pub kind: &'static str,
    pub checksums: BTreeMap<String, String>,
}

impl From<BackendInfo> for Backend {
    fn from(info: BackendInfo) -> Self {
        Backend {
            kind: info.kind,
            checksums: info.checksums,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClassifyOutput {
    pub version: &'static str,
    /// File name only, so output does not depend on the working directory.
    pub image: String,
    pub height_cm: f64,
    pub shape: &'static str,
    pub measurements: MeasurementsCm,
    pub lines: Lines,
    pub cm_per_px: f64,
    pub mask_height_px: u32,
    /// COCO order: nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles.
    pub keypoint_confidences: Vec<f64>,
    pub rule_trace: RuleTrace,
    pub backend: Backend,
}

impl ClassifyOutput {
    pub fn new(image: String, height_cm: f64, a: &Analysis, backend: BackendInfo) -> Self {
        ClassifyOutput {
            version: VERSION,
            image,
            height_cm,
            shape: a.shape.as_str(),
            measurements: MeasurementsCm {
                bust: a.measurements.bust,
                waist: a.measurements.waist,
                hip: a.measurements.hip,
                convention: a.measurements.convention,
            },
            lines: Lines {
                bust: (&a.lines.bust).into(),
                waist: (&a.lines.waist).into(),
                hip: (&a.lines.hip).into(),
            },
            cm_per_px: a.scale.scale,
            mask_height_px: a.mask_height_px,
            keypoint_confidences: a.keypoints.confidences().to_vec(),
            rule_trace: a.trace.clone(),
            backend: backend.into(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub class: ErrorClass,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorOutput {
    pub version: &'static str,
    pub image: String,
    pub error: ErrorBody,
}

impl ErrorOutput {
    pub fn new(image: String, e: &Error) -> Self {
        ErrorOutput {
            version: VERSION,
            image,
            error: ErrorBody {
                kind: e.kind(),
                class: e.class(),
                message: e.to_string(),
            },
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}
