use std::path::PathBuf;

use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or undecodable image {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("image is {width}x{height}, both sides must be at least {min} px")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("height {0} cm is outside [100, 230] cm (metres or inches given?)")]
    HeightOutOfRange(f64),
    #[error("malformed manifest {path}: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("inference backend failure: {0}")]
    BackendFailure(String),
    #[error("keypoint {index} confidence {confidence:.3} is below threshold {threshold:.3}")]
    LowConfidencePose {
        index: usize,
        confidence: f64,
        threshold: f64,
    },

    #[error("no person pixels in the segmentation")]
    NoPersonDetected,
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("row {0} has no foreground pixels")]
    EmptyRow(usize),

    #[error("shoulder row {shoulder:.1} is not above hip row {hip:.1}")]
    UpsideDown { shoulder: f64, hip: f64 },
    #[error("{line} row {row} lies outside the silhouette")]
    LineOutsideMask { line: &'static str, row: i64 },
    #[error("measurement rows out of order: bust {bust}, waist {waist}, hip {hip}")]
    LinesOutOfOrder { bust: usize, waist: usize, hip: usize },

    #[error("measurements must be positive (bust {bust}, waist {waist}, hip {hip})")]
    NonPositiveMeasurement { bust: f64, waist: f64, hip: f64 },

    #[error("infeasible synthetic parameters: {0}")]
    InfeasibleParams(String),
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("no record carries ground-truth measurements")]
    NoMeasurementGroundTruth,

    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error families. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Input,
    NoPersonOrPose,
    Backend,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            BackendFailure(_) => ErrorClass::Backend,
            LowConfidencePose { .. }
            | NoPersonDetected
            | EmptyMask
            | EmptyRow(_)
            | UpsideDown { .. }
            | LineOutsideMask { .. }
            | LinesOutOfOrder { .. }
            | NonPositiveMeasurement { .. } => ErrorClass::NoPersonOrPose,
            _ => ErrorClass::Input,
        }
    }

    /// Variant name, stable across releases; used in JSON error payloads.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            UnreadableFile { .. } => "UnreadableFile",
            UnsupportedFormat { .. } => "UnsupportedFormat",
            ImageTooSmall { .. } => "ImageTooSmall",
            HeightOutOfRange(_) => "HeightOutOfRange",
            MalformedManifest { .. } => "MalformedManifest",
            BackendFailure(_) => "BackendFailure",
            LowConfidencePose { .. } => "LowConfidencePose",
            NoPersonDetected => "NoPersonDetected",
            EmptyMask => "EmptyMask",
            EmptyRow(_) => "EmptyRow",
            UpsideDown { .. } => "UpsideDown",
            LineOutsideMask { .. } => "LineOutsideMask",
            LinesOutOfOrder { .. } => "LinesOutOfOrder",
            NonPositiveMeasurement { .. } => "NonPositiveMeasurement",
            InfeasibleParams(_) => "InfeasibleParams",
            EmptyDataset => "EmptyDataset",
            NoMeasurementGroundTruth => "NoMeasurementGroundTruth",
            InvalidInput(_) => "InvalidInput",
            InvalidConfig(_) => "InvalidConfig",
            Io { .. } => "Io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
