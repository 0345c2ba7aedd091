//! Body-shape classification from a single frontal photograph.
//!
//! A person is segmented, the mask cleaned, bust, waist and hip rows placed
//! from torso keypoints, their widths scaled to centimetres with the
//! subject's stature, and the three measurements classified by a fixed rule
//! list into one of five shapes.

pub mod anthropometry;
pub mod classifier;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod ingest;
pub mod overlay;
pub mod pipeline;
pub mod silhouette;

pub use anthropometry::{AnthroConfig, Convention, Measurements};
pub use classifier::{classify, rule_trace, BodyShape, ClassifierConfig, RuleTrace};
pub use error::{Error, ErrorClass, Result};
pub use inference::{InferenceBackend, ReplayBackend};
pub use ingest::{load_image, validate_height, HeightCm, RgbImage};
pub use pipeline::{analyze_mask, Analysis, Pipeline, PipelineConfig};
