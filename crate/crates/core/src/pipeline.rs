//! End-to-end composition: segmentation, mask cleanup, keypoints, line
//! placement, scaling and classification.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::anthropometry::{locate_lines, measure, px_to_cm, AnthroConfig, BodyLines, Measurements, PxToCm};
use crate::classifier::{rule_trace, BodyShape, ClassifierConfig, RuleTrace};
use crate::error::Result;
use crate::inference::{self, Concurrency, InferenceBackend, KeypointSet};
use crate::ingest::{HeightCm, RgbImage};
use crate::silhouette::{clean_person_mask, BinaryMask, SilhouetteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub silhouette: SilhouetteConfig,
    pub anthropometry: AnthroConfig,
    pub classifier: ClassifierConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.anthropometry.validate()?;
        self.classifier.validate()
    }
}

/// Everything the pipeline derives for one subject.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub shape: BodyShape,
    pub measurements: Measurements,
    pub lines: BodyLines,
    pub scale: PxToCm,
    pub mask_height_px: u32,
    pub keypoints: KeypointSet,
    pub trace: RuleTrace,
}

/// Geometric stages only: cleaned mask plus keypoints to a classification.
pub fn analyze_mask(
    mask: &BinaryMask,
    keypoints: &KeypointSet,
    height: HeightCm,
    cfg: &PipelineConfig,
) -> Result<Analysis> {
    let scale = px_to_cm(height, mask)?;
    let lines = locate_lines(keypoints, mask, &cfg.anthropometry)?;
    let measurements = measure(&lines, scale, &cfg.anthropometry)?;
    let trace = rule_trace(&measurements, &cfg.classifier)?;
    Ok(Analysis {
        shape: trace.shape,
        measurements,
        lines,
        scale,
        mask_height_px: crate::silhouette::mask_height_px(mask)?,
        keypoints: *keypoints,
        trace,
    })
}

pub struct Pipeline {
    backend: Arc<dyn InferenceBackend>,
    config: PipelineConfig,
    gate: Option<Mutex<()>>,
}

impl Pipeline {
    pub fn new(backend: Arc<dyn InferenceBackend>, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let gate = match backend.concurrency() {
            Concurrency::Concurrent => None,
            Concurrency::SingleCall => Some(Mutex::new(())),
        };
        Ok(Self {
            backend,
            config,
            gate,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn InferenceBackend {
        self.backend.as_ref()
    }

    fn gated<T>(&self, f: impl FnOnce() -> T) -> T {
        // a poisoned gate only means another call panicked; the backend holds no state we guard
        let _guard = self
            .gate
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
        f()
    }

    /// Runs every stage; also returns the cleaned mask for overlays.
    pub fn run_detailed(&self, image: &RgbImage, height: HeightCm) -> Result<(Analysis, BinaryMask)> {
        let labels = self.gated(|| inference::segment(image, self.backend.as_ref()))?;
        let mask = clean_person_mask(&labels, &self.config.silhouette)?;
        let person_box = mask.bounding_box()?;
        let subject = image.masked(|x, y| mask.get(x, y));
        let keypoints = self.gated(|| {
            inference::estimate_keypoints(
                &subject,
                &person_box,
                self.backend.as_ref(),
                self.config.anthropometry.keypoint_threshold,
            )
        })?;
        let analysis = analyze_mask(&mask, &keypoints, height, &self.config)?;
        Ok((analysis, mask))
    }

    pub fn run(&self, image: &RgbImage, height: HeightCm) -> Result<Analysis> {
        self.run_detailed(image, height).map(|(a, _)| a)
    }
}
