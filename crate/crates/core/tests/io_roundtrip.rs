use std::path::PathBuf;

use bodyshape::inference::{
    write_fixture, BoundingBox, InferenceBackend, Keypoint, KeypointSet, LabelMap, ModelManifest, ReplayBackend,
    NUM_KEYPOINTS,
};
use bodyshape::ingest::{read_dataset_manifest, write_manifest, MeasurementTruth, Sex, SubjectRecord};
use bodyshape::silhouette::BinaryMask;
use bodyshape::{load_image, validate_height, BodyShape, RgbImage};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = SubjectRecord> {
    (
        "[a-z][a-z0-9_]{0,10}",
        100.0..=230.0f64,
        prop::option::of(0usize..5),
        prop::option::of((50.0..150.0f64, 50.0..150.0f64, 50.0..150.0f64)),
        prop::option::of(prop::bool::ANY),
    )
        .prop_map(|(name, h, shape, truth, sex)| SubjectRecord {
            image_path: PathBuf::from(format!("images/{name}.png")),
            height: validate_height(h).unwrap(),
            true_shape: shape.map(|i| BodyShape::ALL[i]),
            truth: truth.map(|(bust, waist, hip)| MeasurementTruth { bust, waist, hip }),
            sex: sex.map(|f| if f { Sex::Female } else { Sex::Male }),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_round_trip(records in prop::collection::vec(record(), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let absolute: Vec<SubjectRecord> = records
            .iter()
            .map(|r| SubjectRecord { image_path: dir.path().join(&r.image_path), ..r.clone() })
            .collect();
        write_manifest(&path, &absolute).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        prop_assert!(!text.contains(dir.path().to_str().unwrap()), "paths stored relative");
        prop_assert_eq!(read_dataset_manifest(&path).unwrap(), absolute);
    }
}

fn keypoints() -> KeypointSet {
    KeypointSet::new(std::array::from_fn(|i| Keypoint {
        x: 3.0 + i as f64 * 1.7,
        y: 0.1 + i as f64 * 3.3,
        confidence: (i as f64 + 1.0) / 17.0,
    }))
    .unwrap()
}

#[test]
fn replay_is_deterministic_and_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<u8> = (0..80 * 70).map(|i| ((i * 7) % 21) as u8).collect();
    let lm = LabelMap::new(80, 70, labels).unwrap();
    let kp = keypoints();
    write_fixture(dir.path().join("subject"), &lm, &kp).unwrap();
    let backend = ReplayBackend::open(dir.path()).unwrap();
    let image = RgbImage::new(image::RgbImage::new(80, 70)).unwrap().with_name("subject");
    let bbox = BoundingBox { left: 0, top: 0, right: 79, bottom: 69 };
    for _ in 0..3 {
        assert_eq!(backend.segment(&image).unwrap(), lm);
        assert_eq!(backend.keypoints(&image, &bbox).unwrap(), kp);
    }
    assert_eq!(backend.info().kind, "replay");
}

#[test]
fn keypoint_wire_format() {
    let json = serde_json::to_string(&keypoints()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), NUM_KEYPOINTS);
    assert!(arr.iter().all(|p| p.as_array().map(|t| t.len()) == Some(3)));
    assert!(serde_json::from_str::<KeypointSet>("[[1,2,0.5]]").is_err());
    assert!(serde_json::from_str::<KeypointSet>(&json.replace("1.0]", "1.5]")).is_err());
}

#[test]
fn mask_png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = BinaryMask::from_fn(67, 45, |x, y| (x * 3 + y * 5) % 7 < 3);
    let path = dir.path().join("mask.png");
    m.save_png(&path).unwrap();
    assert_eq!(BinaryMask::load_png(&path).unwrap(), m);
}

#[test]
fn model_manifest_checks_sha256() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("seg.onnx"), b"segmentation bytes").unwrap();
    std::fs::write(dir.path().join("kp.onnx"), b"keypoint bytes").unwrap();
    let sha = |p: &str| bodyshape::inference::models::sha256_file(&dir.path().join(p)).unwrap();
    let manifest = serde_json::json!({
        "segmentation": {"path": "seg.onnx", "sha256": sha("seg.onnx")},
        "keypoints": {"path": "kp.onnx", "sha256": sha("kp.onnx")},
    });
    let path = dir.path().join("models.json");
    std::fs::write(&path, manifest.to_string()).unwrap();
    let verified = ModelManifest::load_verified(&path).unwrap();
    assert_eq!(verified.checksums["segmentation"], sha("seg.onnx"));

    std::fs::write(dir.path().join("kp.onnx"), b"tampered").unwrap();
    let err = ModelManifest::load_verified(&path).unwrap_err();
    assert_eq!(err.kind(), "BackendFailure");
}

/// JPEG with an EXIF APP1 segment carrying the given orientation tag.
fn jpeg_with_orientation(img: &image::RgbImage, orientation: u16) -> Vec<u8> {
    let mut plain = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut plain, 95)
        .encode_image(img)
        .unwrap();
    let mut tiff = Vec::new();
    tiff.extend_from_slice(b"II*\0");
    tiff.extend_from_slice(&8u32.to_le_bytes());
    tiff.extend_from_slice(&1u16.to_le_bytes());
    tiff.extend_from_slice(&0x0112u16.to_le_bytes());
    tiff.extend_from_slice(&3u16.to_le_bytes());
    tiff.extend_from_slice(&1u32.to_le_bytes());
    tiff.extend_from_slice(&orientation.to_le_bytes());
    tiff.extend_from_slice(&[0, 0]);
    tiff.extend_from_slice(&0u32.to_le_bytes());
    let mut app1 = b"Exif\0\0".to_vec();
    app1.extend_from_slice(&tiff);
    let mut out = plain[..2].to_vec();
    out.extend_from_slice(&[0xFF, 0xE1]);
    out.extend_from_slice(&((app1.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(&app1);
    out.extend_from_slice(&plain[2..]);
    out
}

#[test]
fn exif_orientation_is_applied() {
    // 96 wide, 64 tall, bright block in the top-left corner
    let img = image::RgbImage::from_fn(96, 64, |x, y| {
        if x < 24 && y < 16 {
            image::Rgb([250, 250, 250])
        } else {
            image::Rgb([10, 10, 10])
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rotated.jpg");
    std::fs::write(&path, jpeg_with_orientation(&img, 6)).unwrap();
    let loaded = load_image(&path).unwrap();
    // orientation 6: rotate 90 degrees clockwise, top-left moves to top-right
    assert_eq!((loaded.width(), loaded.height()), (64, 96));
    assert!(loaded.raster().get_pixel(60, 4).0[0] > 200);
    assert!(loaded.raster().get_pixel(4, 4).0[0] < 60);
    assert_eq!(loaded.name(), Some("rotated"));

    let upright = dir.path().join("upright.jpg");
    std::fs::write(&upright, jpeg_with_orientation(&img, 1)).unwrap();
    assert_eq!(load_image(&upright).unwrap().width(), 96);
}

#[test]
fn png_and_unsupported_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::new(image::RgbImage::from_pixel(70, 90, image::Rgb([1, 2, 3]))).unwrap();
    let path = dir.path().join("a.png");
    img.save_png(&path).unwrap();
    assert_eq!(load_image(&path).unwrap().raster(), img.raster());

    let gif = dir.path().join("b.gif");
    std::fs::write(&gif, b"GIF89a\x46\0\x5a\0\0\0\0;").unwrap();
    assert_eq!(load_image(&gif).unwrap_err().kind(), "UnsupportedFormat");
    let text = dir.path().join("c.png");
    std::fs::write(&text, "not an image").unwrap();
    assert_eq!(load_image(&text).unwrap_err().kind(), "UnsupportedFormat");
    assert_eq!(load_image(dir.path().join("missing.png")).unwrap_err().kind(), "UnreadableFile");

    let small = dir.path().join("small.png");
    image::RgbImage::new(32, 90).save_with_format(&small, image::ImageFormat::Png).unwrap();
    assert_eq!(load_image(&small).unwrap_err().kind(), "ImageTooSmall");
}
