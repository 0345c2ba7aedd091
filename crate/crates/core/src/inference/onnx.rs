use std::path::Path;
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::preprocess::{
    argmax_labels, clamp_to_image, segmentation_tensor, upsample_nearest, KeypointCrop,
    KEYPOINT_INPUT_HEIGHT, KEYPOINT_INPUT_WIDTH, SEGMENTATION_LONG_SIDE,
};
use super::{
    decode_heatmaps, BackendInfo, BoundingBox, Heatmaps, InferenceBackend, KeypointSet, LabelMap,
    VerifiedModels, NUM_KEYPOINTS, NUM_VOC_CLASSES,
};
use crate::error::{Error, Result};
use crate::ingest::RgbImage;

type Plan = Arc<TypedRunnableModel>;

/// Runs the exported segmentation and keypoint networks from ONNX files.
///
/// The segmentation input is a fixed 513x513 canvas: the resized image sits
/// in the top-left corner and the remainder is zero after normalisation.
pub struct OnnxBackend {
    segmentation: Plan,
    keypoints: Plan,
    info: BackendInfo,
}

fn backend_err(context: &str) -> impl Fn(TractError) -> Error + '_ {
    move |e| Error::BackendFailure(format!("{context}: {e}"))
}

fn load_plan(path: &Path, shape: [usize; 4]) -> Result<Plan> {
    let err = backend_err("loading model");
    tract_onnx::onnx()
        .model_for_path(path)
        .map_err(&err)?
        .with_input_fact(0, f32::fact(shape).into())
        .map_err(&err)?
        .into_optimized()
        .map_err(&err)?
        .into_runnable()
        .map_err(&err)
}

impl OnnxBackend {
    pub fn load(models: &VerifiedModels) -> Result<Self> {
        let side = SEGMENTATION_LONG_SIDE as usize;
        let segmentation = load_plan(&models.segmentation, [1, 3, side, side])?;
        let keypoints = load_plan(
            &models.keypoints,
            [1, 3, KEYPOINT_INPUT_HEIGHT as usize, KEYPOINT_INPUT_WIDTH as usize],
        )?;
        Ok(Self {
            segmentation,
            keypoints,
            info: BackendInfo {
                kind: "onnx",
                checksums: models.checksums.clone(),
            },
        })
    }
}

fn run(plan: &Plan, shape: [usize; 4], data: Vec<f32>) -> Result<Tensor> {
    let err = backend_err("inference");
    let input = Tensor::from_shape(&shape, &data).map_err(&err)?;
    let mut outputs = plan.run(tvec!(input.into())).map_err(&err)?;
    let out = outputs.remove(0).into_tensor();
    Ok(out)
}

impl InferenceBackend for OnnxBackend {
    fn segment(&self, image: &RgbImage) -> Result<LabelMap> {
        let side = SEGMENTATION_LONG_SIDE as usize;
        let (w, h, tensor) = segmentation_tensor(image);
        let (w, h) = (w as usize, h as usize);
        let mut canvas = vec![0.0f32; 3 * side * side];
        for c in 0..3 {
            for y in 0..h {
                let src = c * w * h + y * w;
                let dst = c * side * side + y * side;
                canvas[dst..dst + w].copy_from_slice(&tensor[src..src + w]);
            }
        }
        let out = run(&self.segmentation, [1, 3, side, side], canvas)?;
        let shape = out.shape().to_vec();
        if shape.len() != 4 || shape[1] != NUM_VOC_CLASSES as usize {
            return Err(Error::BackendFailure(format!(
                "unexpected segmentation output shape {shape:?}"
            )));
        }
        let (oh, ow) = (shape[2], shape[3]);
        let logits = out
            .try_as_plain_ram()
            .and_then(|v| v.as_slice::<f32>())
            .map_err(backend_err("segmentation output"))?;
        let labels = argmax_labels(logits, NUM_VOC_CLASSES as usize, ow, oh);
        // crop the region covering the image, then back to source size
        let vw = ((w * ow) as f64 / side as f64).round().clamp(1.0, ow as f64) as usize;
        let vh = ((h * oh) as f64 / side as f64).round().clamp(1.0, oh as f64) as usize;
        let valid: Vec<u8> = (0..vh)
            .flat_map(|y| labels[y * ow..y * ow + vw].iter().copied())
            .collect();
        let full = upsample_nearest(&valid, vw as u32, vh as u32, image.width(), image.height());
        LabelMap::new(image.width(), image.height(), full)
    }

    fn keypoints(&self, image: &RgbImage, person_box: &BoundingBox) -> Result<KeypointSet> {
        let crop = KeypointCrop::from_person_box(person_box);
        let shape = [
            1,
            3,
            KEYPOINT_INPUT_HEIGHT as usize,
            KEYPOINT_INPUT_WIDTH as usize,
        ];
        let out = run(&self.keypoints, shape, crop.tensor(image))?;
        let dims = out.shape().to_vec();
        if dims.len() != 4 || dims[1] != NUM_KEYPOINTS {
            return Err(Error::BackendFailure(format!(
                "unexpected heatmap output shape {dims:?}"
            )));
        }
        let (gh, gw) = (dims[2], dims[3]);
        let values = out
            .try_as_plain_ram()
            .and_then(|v| v.as_slice::<f32>())
            .map_err(backend_err("heatmap output"))?;
        let channels = values
            .chunks(gw * gh)
            .map(|ch| ch.iter().map(|v| v.max(0.0)).collect())
            .collect();
        let heatmaps = Heatmaps::new(gw, gh, channels, crop.grid_to_image(gw, gh))?;
        Ok(clamp_to_image(
            &decode_heatmaps(&heatmaps),
            image.width(),
            image.height(),
        ))
    }

    fn info(&self) -> BackendInfo {
        self.info.clone()
    }
}
