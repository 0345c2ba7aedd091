//! Image decoding, height validation and the evaluation-dataset manifest.

use std::fs::File;
use std::io::{BufReader, Cursor};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageDecoder, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::classifier::BodyShape;
use crate::error::{Error, Result};

pub const MIN_IMAGE_SIDE: u32 = 64;
pub const MIN_HEIGHT_CM: f64 = 100.0;
pub const MAX_HEIGHT_CM: f64 = 230.0;

/// Decoded 8-bit RGB raster, upright, at least 64 px on each side.
///
/// `name` is the source file stem when the image came from disk; the replay
/// backend uses it to find recorded fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    raster: image::RgbImage,
    name: Option<String>,
}

impl RgbImage {
    pub fn new(raster: image::RgbImage) -> Result<Self> {
        let (width, height) = raster.dimensions();
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(Error::ImageTooSmall {
                width,
                height,
                min: MIN_IMAGE_SIDE,
            });
        }
        Ok(Self { raster, name: None })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn width(&self) -> u32 {
        self.raster.width()
    }

    pub fn height(&self) -> u32 {
        self.raster.height()
    }

    pub fn raster(&self) -> &image::RgbImage {
        &self.raster
    }

    pub fn into_raster(self) -> image::RgbImage {
        self.raster
    }

    /// Copy with every pixel outside `keep` set to black.
    pub fn masked(&self, keep: impl Fn(u32, u32) -> bool) -> RgbImage {
        let mut raster = self.raster.clone();
        for (x, y, px) in raster.enumerate_pixels_mut() {
            if !keep(x, y) {
                *px = image::Rgb([0, 0, 0]);
            }
        }
        RgbImage {
            raster,
            name: self.name.clone(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.raster
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::InvalidInput(format!("cannot encode {}: {other}", path.display())),
            })
    }
}

/// Decodes a PNG or JPEG file and applies its EXIF orientation.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    let unsupported = |reason: String| Error::UnsupportedFormat {
        path: path.to_owned(),
        reason,
    };

    let reader = ImageReader::new(Cursor::new(&bytes))
        .with_guessed_format()
        .map_err(|e| unsupported(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Jpeg) => {}
        Some(other) => return Err(unsupported(format!("{other:?} is not PNG or JPEG"))),
        None => return Err(unsupported("not a recognised raster format".into())),
    }
    let mut decoder = reader
        .into_decoder()
        .map_err(|e| unsupported(e.to_string()))?;
    let orientation = decoder
        .orientation()
        .map_err(|e| unsupported(e.to_string()))?;
    let mut decoded = DynamicImage::from_decoder(decoder).map_err(|e| unsupported(e.to_string()))?;
    decoded.apply_orientation(orientation);

    let image = RgbImage::new(decoded.into_rgb8())?;
    Ok(match path.file_stem().and_then(|s| s.to_str()) {
        Some(stem) => image.with_name(stem),
        None => image,
    })
}

/// User stature in centimetres, within [100, 230].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct HeightCm(f64);

impl HeightCm {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for HeightCm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = f64::deserialize(d)?;
        validate_height(raw).map_err(serde::de::Error::custom)
    }
}

pub fn validate_height(raw: f64) -> Result<HeightCm> {
    if raw.is_finite() && (MIN_HEIGHT_CM..=MAX_HEIGHT_CM).contains(&raw) {
        Ok(HeightCm(raw))
    } else {
        Err(Error::HeightOutOfRange(raw))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

/// Tape-measured bust, waist and hip in centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTruth {
    pub bust: f64,
    pub waist: f64,
    pub hip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub image_path: PathBuf,
    pub height: HeightCm,
    pub true_shape: Option<BodyShape>,
    pub truth: Option<MeasurementTruth>,
    pub sex: Option<Sex>,
}

pub const MANIFEST_HEADER: [&str; 7] = [
    "image",
    "height_cm",
    "shape",
    "bust_cm",
    "waist_cm",
    "hip_cm",
    "sex",
];

/// Reads the CSV manifest. Image paths are resolved against the manifest's
/// directory.
pub fn read_dataset_manifest(path: impl AsRef<Path>) -> Result<Vec<SubjectRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::UnreadableFile {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("")).to_owned();
    let malformed = |reason: String| Error::MalformedManifest {
        path: path.to_owned(),
        reason,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let image_col = column("image").ok_or_else(|| malformed("missing column `image`".into()))?;
    let height_col =
        column("height_cm").ok_or_else(|| malformed("missing column `height_cm`".into()))?;
    let [shape_col, bust_col, waist_col, hip_col, sex_col] =
        ["shape", "bust_cm", "waist_cm", "hip_cm", "sex"].map(column);

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(format!("line {line}: {e}")))?;
        let field = |col: Option<usize>| col.and_then(|c| row.get(c)).filter(|s| !s.is_empty());
        let number = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
            field(col)
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| malformed(format!("line {line}: bad {name} `{s}`")))
                })
                .transpose()
        };

        let image = field(Some(image_col))
            .ok_or_else(|| malformed(format!("line {line}: empty image path")))?;
        let raw_height = number(Some(height_col), "height_cm")?
            .ok_or_else(|| malformed(format!("line {line}: empty height_cm")))?;
        let height = validate_height(raw_height)
            .map_err(|e| malformed(format!("line {line}: {e}")))?;
        let true_shape = field(shape_col)
            .map(|s| {
                s.parse::<BodyShape>()
                    .map_err(|_| malformed(format!("line {line}: unknown shape label `{s}`")))
            })
            .transpose()?;
        let truth = match (
            number(bust_col, "bust_cm")?,
            number(waist_col, "waist_cm")?,
            number(hip_col, "hip_cm")?,
        ) {
            (Some(bust), Some(waist), Some(hip)) => Some(MeasurementTruth { bust, waist, hip }),
            (None, None, None) => None,
            _ => {
                return Err(malformed(format!(
                    "line {line}: bust_cm, waist_cm and hip_cm must be given together"
                )))
            }
        };
        let sex = field(sex_col)
            .map(|s| match s.to_ascii_lowercase().as_str() {
                "male" => Ok(Sex::Male),
                "female" => Ok(Sex::Female),
                _ => Err(malformed(format!("line {line}: unknown sex `{s}`"))),
            })
            .transpose()?;

        records.push(SubjectRecord {
            image_path: base.join(image),
            height,
            true_shape,
            truth,
            sex,
        });
    }
    Ok(records)
}

/// Writes records in the manifest format. Paths under the manifest's
/// directory are stored relative to it.
pub fn write_manifest(path: impl AsRef<Path>, records: &[SubjectRecord]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::InvalidInput(format!("writing {}: {e}", path.display()));

    writer.write_record(MANIFEST_HEADER).map_err(io)?;
    for r in records {
        let image = r.image_path.strip_prefix(base).unwrap_or(&r.image_path);
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writer
            .write_record([
                image.to_string_lossy().into_owned(),
                r.height.value().to_string(),
                r.true_shape.map(|s| s.as_str().to_owned()).unwrap_or_default(),
                opt(r.truth.map(|t| t.bust)),
                opt(r.truth.map(|t| t.waist)),
                opt(r.truth.map(|t| t.hip)),
                r.sex.map(|s| s.as_str().to_owned()).unwrap_or_default(),
            ])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
