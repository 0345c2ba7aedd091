//! Backend contract for the two learned stages (person segmentation and
//! keypoint estimation) plus the shared output types.
//!
//! Everything downstream of these two calls is deterministic geometry, so a
//! [`ReplayBackend`] serving recorded outputs exercises the full pipeline
//! without any model runtime.

mod heatmap;
pub mod models;
pub mod preprocess;
mod replay;

#[cfg(feature = "onnx")]
mod onnx;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RgbImage;

pub use heatmap::{decode_heatmaps, Affine2, Heatmaps};
pub use models::{ModelFile, ModelManifest, VerifiedModels};
pub use replay::{write_fixture, ReplayBackend, KEYPOINTS_FILE, LABELMAP_FILE};

#[cfg(feature = "onnx")]
pub use onnx::OnnxBackend;

/// PASCAL VOC class index of `person`.
pub const PERSON_CLASS: u8 = 15;
pub const NUM_VOC_CLASSES: u8 = 21;
pub const NUM_KEYPOINTS: usize = 17;
pub const DEFAULT_KEYPOINT_THRESHOLD: f64 = 0.3;

/// Keypoints that must be confidently located for measurement-line placement.
pub const TORSO_KEYPOINTS: [KeypointKind; 4] = [
    KeypointKind::LeftShoulder,
    KeypointKind::RightShoulder,
    KeypointKind::LeftHip,
    KeypointKind::RightHip,
];

/// Per-pixel PASCAL VOC class indices at source resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::InvalidInput(format!(
                "label map of {width}x{height} needs {} labels, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= NUM_VOC_CLASSES) {
            return Err(Error::InvalidInput(format!("label {bad} is not a VOC class")));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Loads an 8-bit single-channel PNG of class indices.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::BackendFailure(format!("{}: {e}", path.display())))?;
        let luma = match img {
            image::DynamicImage::ImageLuma8(l) => l,
            other => {
                return Err(Error::BackendFailure(format!(
                    "{}: expected 8-bit single channel, got {:?}",
                    path.display(),
                    other.color()
                )))
            }
        };
        let (w, h) = luma.dimensions();
        Self::new(w, h, luma.into_raw())
            .map_err(|e| Error::BackendFailure(format!("{}: {e}", path.display())))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::GrayImage::from_raw(self.width, self.height, self.labels.clone())
            .expect("dimensions checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::InvalidInput(format!("writing {}: {e}", path.display())))
    }
}

/// COCO keypoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeypointKind {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl KeypointKind {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

// Wire format is a bare `[x, y, conf]` triple.
impl Serialize for Keypoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.confidence].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Keypoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, confidence] = <[f64; 3]>::deserialize(d)?;
        Ok(Keypoint { x, y, confidence })
    }
}

/// The 17 COCO body keypoints in source-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Keypoint>", into = "Vec<Keypoint>")]
pub struct KeypointSet {
    points: [Keypoint; NUM_KEYPOINTS],
}

impl KeypointSet {
    pub fn new(points: [Keypoint; NUM_KEYPOINTS]) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidInput(format!("keypoint {i} is not finite")));
            }
            if !(0.0..=1.0).contains(&p.confidence) {
                return Err(Error::InvalidInput(format!(
                    "keypoint {i} confidence {} outside [0, 1]",
                    p.confidence
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.points
    }

    pub fn get(&self, kind: KeypointKind) -> Keypoint {
        self.points[kind.index()]
    }

    pub fn confidences(&self) -> [f64; NUM_KEYPOINTS] {
        self.points.map(|p| p.confidence)
    }

    /// True when every point lies in `[0, width-1] x [0, height-1]`.
    pub fn within(&self, width: u32, height: u32) -> bool {
        let (w, h) = (f64::from(width) - 1.0, f64::from(height) - 1.0);
        self.points
            .iter()
            .all(|p| (0.0..=w).contains(&p.x) && (0.0..=h).contains(&p.y))
    }

    /// Fails with `LowConfidencePose` on the first torso keypoint below `threshold`.
    pub fn require_torso(&self, threshold: f64) -> Result<()> {
        for kind in TORSO_KEYPOINTS {
            let confidence = self.get(kind).confidence;
            if confidence < threshold {
                return Err(Error::LowConfidencePose {
                    index: kind.index(),
                    confidence,
                    threshold,
                });
            }
        }
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BackendFailure(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::BackendFailure(format!("{}: {e}", path.display())))
    }
}

impl TryFrom<Vec<Keypoint>> for KeypointSet {
    type Error = Error;

    fn try_from(v: Vec<Keypoint>) -> Result<Self> {
        let n = v.len();
        let points: [Keypoint; NUM_KEYPOINTS] = v.try_into().map_err(|_| {
            Error::InvalidInput(format!("expected {NUM_KEYPOINTS} keypoints, got {n}"))
        })?;
        KeypointSet::new(points)
    }
}

impl From<KeypointSet> for Vec<Keypoint> {
    fn from(k: KeypointSet) -> Self {
        k.points.to_vec()
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BoundingBox {
    pub fn width(&self) -> u32 {
        self.right - self.left + 1
    }

    pub fn height(&self) -> u32 {
        self.bottom - self.top + 1
    }
}

/// Whether a backend tolerates overlapping calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    Concurrent,
    /// The pipeline serialises calls behind a lock.
    SingleCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendInfo {
    pub kind: &'static str,
    /// Model name to sha256; empty for the replay backend.
    pub checksums: std::collections::BTreeMap<String, String>,
}

pub trait InferenceBackend: Send + Sync {
    /// Per-pixel VOC labels at the image's own resolution.
    fn segment(&self, image: &RgbImage) -> Result<LabelMap>;

    /// 17 keypoints for the person inside `person_box`.
    fn keypoints(&self, image: &RgbImage, person_box: &BoundingBox) -> Result<KeypointSet>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn info(&self) -> BackendInfo;
}

/// Runs segmentation and enforces the source-resolution contract.
pub fn segment(image: &RgbImage, backend: &dyn InferenceBackend) -> Result<LabelMap> {
    let labels = backend.segment(image)?;
    if (labels.width(), labels.height()) != (image.width(), image.height()) {
        return Err(Error::BackendFailure(format!(
            "label map is {}x{} but the image is {}x{}",
            labels.width(),
            labels.height(),
            image.width(),
            image.height()
        )));
    }
    Ok(labels)
}

/// Runs keypoint estimation, checks bounds and torso confidence.
pub fn estimate_keypoints(
    image: &RgbImage,
    person_box: &BoundingBox,
    backend: &dyn InferenceBackend,
    threshold: f64,
) -> Result<KeypointSet> {
    let kp = backend.keypoints(image, person_box)?;
    if !kp.within(image.width(), image.height()) {
        return Err(Error::BackendFailure(
            "keypoints fall outside the image".into(),
        ));
    }
    kp.require_torso(threshold)?;
    Ok(kp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp_set(conf: f64) -> [Keypoint; NUM_KEYPOINTS] {
        [Keypoint {
            x: 10.0,
            y: 20.0,
            confidence: conf,
        }; NUM_KEYPOINTS]
    }

    #[test]
    fn keypoint_json_format() {
        let set = KeypointSet::new(kp_set(0.5)).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        assert!(json.starts_with("[[10.0,20.0,0.5],"));
        let back: KeypointSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        assert!(serde_json::from_str::<KeypointSet>("[[1,2,0.5]]").is_err());
        let bad = json.replacen("0.5", "1.5", 1);
        assert!(serde_json::from_str::<KeypointSet>(&bad).is_err());
    }

    #[test]
    fn torso_threshold() {
        let mut points = kp_set(0.9);
        points[KeypointKind::LeftHip.index()].confidence = 0.1;
        let set = KeypointSet::new(points).unwrap();
        match set.require_torso(DEFAULT_KEYPOINT_THRESHOLD) {
            Err(Error::LowConfidencePose { index, .. }) => assert_eq!(index, 11),
            other => panic!("{other:?}"),
        }
        // non-torso points don't matter
        let mut points = kp_set(0.9);
        points[0].confidence = 0.0;
        assert!(KeypointSet::new(points).unwrap().require_torso(0.3).is_ok());
    }

    #[test]
    fn label_map_validation() {
        assert!(LabelMap::new(2, 2, vec![0, 15, 20, 0]).is_ok());
        assert!(LabelMap::new(2, 2, vec![0, 15, 21, 0]).is_err());
        assert!(LabelMap::new(2, 2, vec![0, 15, 20]).is_err());
    }
}
