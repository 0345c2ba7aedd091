//! JSON model manifest with sha256 integrity checks.
//!
//! ```json
//! { "segmentation": {"path": "deeplabv3.onnx", "sha256": "…"},
//!   "keypoints":    {"path": "hrnet.onnx",     "sha256": "…"} }
//! ```
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub segmentation: ModelFile,
    pub keypoints: ModelFile,
}

/// Manifest whose files exist and match their recorded checksums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedModels {
    pub segmentation: PathBuf,
    pub keypoints: PathBuf,
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::BackendFailure(format!("model file {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Error::BackendFailure(format!("reading {}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl ModelManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BackendFailure(format!("model manifest {}: {e}", path.display())))?;
        let manifest: ModelManifest = serde_json::from_str(&text)
            .map_err(|e| Error::BackendFailure(format!("model manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_owned();
        Ok((manifest, base))
    }

    /// Resolves paths against `base` and checks both checksums.
    pub fn verify(&self, base: &Path) -> Result<VerifiedModels> {
        let mut checksums = BTreeMap::new();
        let mut check = |name: &str, file: &ModelFile| -> Result<PathBuf> {
            let path = base.join(&file.path);
            let actual = sha256_file(&path)?;
            if !actual.eq_ignore_ascii_case(file.sha256.trim()) {
                return Err(Error::BackendFailure(format!(
                    "{name} model {} has sha256 {actual}, manifest says {}",
                    path.display(),
                    file.sha256
                )));
            }
            checksums.insert(name.to_owned(), actual);
            Ok(path)
        };
        let segmentation = check("segmentation", &self.segmentation)?;
        let keypoints = check("keypoints", &self.keypoints)?;
        Ok(VerifiedModels {
            segmentation,
            keypoints,
            checksums,
        })
    }

    pub fn load_verified(path: impl AsRef<Path>) -> Result<VerifiedModels> {
        let (manifest, base) = Self::load(path)?;
        manifest.verify(&base)
    }
}
