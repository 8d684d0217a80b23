use proptest::prelude::*;
use serde_json::json;
use tsr_core::formats::{generate_fixtures, AnnotationFile, FileKind, FixtureSpec};
use tsr_core::Error;

fn spec(seed: u64) -> FixtureSpec {
    FixtureSpec {
        n_tables: 5,
        seed,
        ..FixtureSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn save_then_load_is_byte_identical(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let f = generate_fixtures(&spec(seed)).unwrap();
        for (file, kind, name) in [
            (&f.ground_truth, FileKind::GroundTruth, "gt.json"),
            (&f.predictions, FileKind::Detections, "pred.json"),
        ] {
            let a = dir.path().join(name);
            let b = dir.path().join(format!("again-{name}"));
            file.save(&a).unwrap();
            let loaded = AnnotationFile::load(&a, kind).unwrap();
            prop_assert!(loaded.warnings.is_empty());
            prop_assert_eq!(&loaded.file, file);
            loaded.file.save(&b).unwrap();
            prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        }
    }

    #[test]
    fn fixed_seed_is_reproducible(seed in any::<u64>()) {
        let a = generate_fixtures(&spec(seed)).unwrap();
        let b = generate_fixtures(&spec(seed)).unwrap();
        prop_assert_eq!(a.ground_truth.to_canonical_json(), b.ground_truth.to_canonical_json());
        prop_assert_eq!(a.predictions.to_canonical_json(), b.predictions.to_canonical_json());
    }
}

#[test]
fn unknown_fields_survive_a_round_trip() {
    let text = json!({
        "schema_version": 1,
        "label_mode": "multi",
        "source": "scan-42",
        "images": [{
            "image_id": "a",
            "width": 100,
            "height": 80,
            "dpi": 300,
            "instances": [{"bbox": [1.0, 2.0, 50.0, 40.0], "class_id": 0, "note": {"k": [1, 2]}}]
        }]
    })
    .to_string();
    let loaded = AnnotationFile::from_json_str(&text, FileKind::GroundTruth).unwrap().file;
    let out: serde_json::Value = serde_json::from_str(&loaded.to_canonical_json()).unwrap();
    assert_eq!(out["source"], "scan-42");
    assert_eq!(out["images"][0]["dpi"], 300);
    assert_eq!(out["images"][0]["instances"][0]["note"], json!({"k": [1, 2]}));
    let again = AnnotationFile::from_json_str(&loaded.to_canonical_json(), FileKind::GroundTruth).unwrap();
    assert_eq!(again.file.to_canonical_json(), loaded.to_canonical_json());
}

#[test]
fn schema_errors_carry_a_path() {
    let text = r#"{"schema_version":1,"label_mode":"multi","images":[{"image_id":"a","width":10,"height":10,"instances":[{"bbox":[0,0,1],"class_id":0}]}]}"#;
    match AnnotationFile::from_json_str(text, FileKind::Detections) {
        Err(Error::Schema { path, .. }) => assert!(path.contains("images[0]"), "{path}"),
        other => panic!("expected schema error, got {other:?}"),
    }
}
