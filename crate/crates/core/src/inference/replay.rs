use std::path::{Path, PathBuf};

use super::{BackendInfo, BoundingBox, InferenceBackend, KeypointSet, LabelMap};
use crate::error::{Error, Result};
use crate::ingest::RgbImage;

pub const LABELMAP_FILE: &str = "labelmap.png";
pub const KEYPOINTS_FILE: &str = "keypoints.json";

/// Serves recorded backend outputs.
///
/// `root` is either a single fixture directory (holding `labelmap.png` and
/// `keypoints.json`, served for any image) or a directory of fixture
/// directories named after the image file stem.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    root: PathBuf,
    single: bool,
}

impl ReplayBackend {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::BackendFailure(format!(
                "replay directory {} does not exist",
                root.display()
            )));
        }
        let single = root.join(LABELMAP_FILE).is_file();
        Ok(Self { root, single })
    }

    fn fixture_dir(&self, image: &RgbImage) -> Result<PathBuf> {
        if self.single {
            return Ok(self.root.clone());
        }
        let name = image.name().ok_or_else(|| {
            Error::BackendFailure("replay lookup needs an image loaded from a file".into())
        })?;
        let dir = self.root.join(name);
        if dir.join(LABELMAP_FILE).is_file() {
            Ok(dir)
        } else {
            Err(Error::BackendFailure(format!(
                "no replay fixture for `{name}` under {}",
                self.root.display()
            )))
        }
    }
}

impl InferenceBackend for ReplayBackend {
    fn segment(&self, image: &RgbImage) -> Result<LabelMap> {
        LabelMap::load_png(self.fixture_dir(image)?.join(LABELMAP_FILE))
    }

    fn keypoints(&self, image: &RgbImage, _person_box: &BoundingBox) -> Result<KeypointSet> {
        KeypointSet::load_json(self.fixture_dir(image)?.join(KEYPOINTS_FILE))
    }

    fn info(&self) -> BackendInfo {
        BackendInfo {
            kind: "replay",
            checksums: Default::default(),
        }
    }
}

/// Writes one fixture directory in the replay format.
pub fn write_fixture(dir: impl AsRef<Path>, labels: &LabelMap, keypoints: &KeypointSet) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    labels.save_png(dir.join(LABELMAP_FILE))?;
    let path = dir.join(KEYPOINTS_FILE);
    let json = serde_json::to_string(keypoints).expect("keypoints serialize");
    std::fs::write(&path, json).map_err(|e| Error::io(path, e))
}
