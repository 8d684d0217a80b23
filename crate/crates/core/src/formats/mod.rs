//! Versioned JSON corpus files and synthetic fixture generation.
//!
//! Detection and ground-truth files share one schema:
//!
//! ```json
//! { "schema_version": 1, "label_mode": "multi",
//!   "images": [ { "image_id": "a", "width": 640, "height": 480,
//!                 "instances": [ { "bbox": [x1, y1, x2, y2], "class_id": 2, "score": 0.9 } ],
//!                 "html": "<table>...</table>" } ] }
//! ```
//!
//! Ground-truth files carry no scores and may carry `html` and per-instance
//! `content_extent`. Unknown fields at any level survive a load/save cycle.

mod fixtures;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use serde_path_to_error::Segment;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::labelspace::{AnnotationSet, ComponentClass, ComponentInstance, LabelMode};
use crate::teds::parse_table_html;

pub use fixtures::{generate_fixtures, FixtureSpec, Fixtures};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileLabelMode {
    Multi,
    Single,
}

impl From<FileLabelMode> for LabelMode {
    fn from(m: FileLabelMode) -> Self {
        match m {
            FileLabelMode::Multi => LabelMode::MultiLabel,
            FileLabelMode::Single => LabelMode::SingleLabel,
        }
    }
}

impl From<LabelMode> for FileLabelMode {
    fn from(m: LabelMode) -> Self {
        match m {
            LabelMode::MultiLabel => FileLabelMode::Multi,
            LabelMode::SingleLabel => FileLabelMode::Single,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub bbox: [f64; 4],
    pub class_id: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_extent: Option<[f64; 4]>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<InstanceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub html: Option<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub schema_version: u32,
    pub label_mode: FileLabelMode,
    pub images: Vec<ImageRecord>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Which validation rules apply on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Detections,
    GroundTruth,
}

/// A validated file plus the clamping warnings raised while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub file: AnnotationFile,
    pub warnings: Vec<String>,
}

fn schema(record: Option<usize>, path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        record,
        path: path.into(),
        message: message.into(),
    }
}

/// Image record index named by a deserializer path, if any.
fn record_of(path: &serde_path_to_error::Path) -> Option<usize> {
    let mut segs = path.iter();
    while let Some(s) = segs.next() {
        if matches!(s, Segment::Map { key } if key == "images") {
            if let Some(Segment::Seq { index }) = segs.next() {
                return Some(*index);
            }
        }
    }
    None
}

fn check_box(c: [f64; 4], record: usize, path: &str) -> Result<()> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(schema(Some(record), path, "coordinates must be finite"));
    }
    if c[0] > c[2] || c[1] > c[3] {
        return Err(schema(Some(record), path, format!("inverted box {c:?}")));
    }
    Ok(())
}

fn clamp_box(c: &mut [f64; 4], width: u32, height: u32, image_id: &str, path: &str, warnings: &mut Vec<String>) {
    let limits = [width as f64, height as f64, width as f64, height as f64];
    let before = *c;
    for (v, hi) in c.iter_mut().zip(limits) {
        *v = v.clamp(0.0, hi);
    }
    if *c != before {
        warnings.push(format!("image {image_id}: {path} {before:?} clamped to {c:?}"));
    }
}

impl AnnotationFile {
    pub fn new(label_mode: LabelMode, images: Vec<ImageRecord>) -> Self {
        AnnotationFile {
            schema_version: SCHEMA_VERSION,
            label_mode: label_mode.into(),
            images,
            extra: Map::new(),
        }
    }

    pub fn mode(&self) -> LabelMode {
        self.label_mode.into()
    }

    /// Parses and validates, clamping out-of-image coordinates.
    pub fn from_json_str(text: &str, kind: FileKind) -> Result<Loaded> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut file: AnnotationFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let record = record_of(e.path());
            schema(record, e.path().to_string(), e.inner().to_string())
        })?;
        let warnings = file.validate(kind)?;
        Ok(Loaded { file, warnings })
    }

    fn validate(&mut self, kind: FileKind) -> Result<Vec<String>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                None,
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let mode = self.mode();
        let mut warnings = Vec::new();
        let mut seen = BTreeSet::new();
        for (r, img) in self.images.iter_mut().enumerate() {
            if !seen.insert(img.image_id.clone()) {
                return Err(schema(Some(r), format!("images[{r}].image_id"), format!("duplicate image id {}", img.image_id)));
            }
            if img.width == 0 || img.height == 0 {
                return Err(schema(Some(r), format!("images[{r}]"), "width and height must be positive"));
            }
            for (k, inst) in img.instances.iter_mut().enumerate() {
                let base = format!("images[{r}].instances[{k}]");
                let class = ComponentClass::from_id(inst.class_id)
                    .ok_or_else(|| schema(Some(r), format!("{base}.class_id"), format!("unknown class id {}", inst.class_id)))?;
                if !class.allowed_in(mode) {
                    return Err(schema(
                        Some(r),
                        format!("{base}.class_id"),
                        format!("class {} is not allowed under label_mode {}", inst.class_id, mode.as_str()),
                    ));
                }
                if let Some(s) = inst.score {
                    if kind == FileKind::GroundTruth {
                        return Err(schema(Some(r), format!("{base}.score"), "ground truth carries no scores"));
                    }
                    if !(0.0..=1.0).contains(&s) {
                        return Err(schema(Some(r), format!("{base}.score"), format!("score {s} outside [0, 1]")));
                    }
                }
                check_box(inst.bbox, r, &format!("{base}.bbox"))?;
                clamp_box(&mut inst.bbox, img.width, img.height, &img.image_id, &format!("{base}.bbox"), &mut warnings);
                if let Some(ext) = inst.content_extent.as_mut() {
                    let p = format!("{base}.content_extent");
                    check_box(*ext, r, &p)?;
                    clamp_box(ext, img.width, img.height, &img.image_id, &p, &mut warnings);
                }
            }
            if let (FileKind::GroundTruth, Some(html)) = (kind, &img.html) {
                parse_table_html(html)
                    .map_err(|e| schema(Some(r), format!("images[{r}].html"), e.to_string()))?;
            }
        }
        Ok(warnings)
    }

    /// Pretty JSON with a trailing newline. Loading and re-saving this text
    /// reproduces it byte for byte.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("annotation files always serialize");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>, kind: FileKind) -> Result<Loaded> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AnnotationFile::from_json_str(&text, kind)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_canonical_json().as_bytes())
    }

    /// Converts each image record into an [`AnnotationSet`] of this file's mode.
    pub fn annotation_sets(&self) -> Result<Vec<AnnotationSet>> {
        self.images.iter().map(|img| img.to_annotation_set(self.mode())).collect()
    }
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, width: u32, height: u32) -> Self {
        ImageRecord {
            image_id: image_id.into(),
            width,
            height,
            instances: Vec::new(),
            html: None,
            extra: Map::new(),
        }
    }

    pub fn to_annotation_set(&self, mode: LabelMode) -> Result<AnnotationSet> {
        let instances = self
            .instances
            .iter()
            .map(|r| {
                let bbox = BBox::from_array(r.bbox)?;
                let class = ComponentClass::from_id(r.class_id)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown class id {}", r.class_id)))?;
                match r.score {
                    Some(s) => ComponentInstance::predicted(bbox, class, s),
                    None => Ok(ComponentInstance::ground_truth(bbox, class)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnnotationSet::new(self.image_id.clone(), instances, mode))
    }

    /// Builds a record from an annotation set; extents and html are left empty.
    pub fn from_annotation_set(set: &AnnotationSet, width: u32, height: u32) -> Self {
        let mut rec = ImageRecord::new(set.image_id.clone(), width, height);
        rec.instances = set.instances.iter().map(InstanceRecord::from_instance).collect();
        rec
    }

    /// Content extents in instance order, when every instance has one.
    pub fn content_extents(&self) -> Option<Vec<BBox>> {
        self.instances
            .iter()
            .map(|i| i.content_extent.and_then(|c| BBox::from_array(c).ok()))
            .collect()
    }
}

impl InstanceRecord {
    pub fn from_instance(inst: &ComponentInstance) -> Self {
        InstanceRecord {
            bbox: inst.bbox.to_array(),
            class_id: inst.class.id(),
            score: inst.confidence,
            content_extent: None,
            extra: Map::new(),
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
  "schema_version": 1,
  "label_mode": "multi",
  "images": [
    {
      "image_id": "a",
      "width": 100,
      "height": 50,
      "instances": [
        { "bbox": [-3, 0, 40, 20], "class_id": 2, "note": "kept" },
        { "bbox": [10, 5, 120, 20], "class_id": 1 }
      ],
      "source": "scan-7"
    }
  ],
  "producer": "test"
}"#;

    #[test]
    fn clamps_with_warnings_and_keeps_unknown_fields() {
        let loaded = AnnotationFile::from_json_str(SAMPLE, FileKind::GroundTruth).unwrap();
        assert_eq!(loaded.warnings.len(), 2);
        let img = &loaded.file.images[0];
        assert_eq!(img.instances[0].bbox, [0.0, 0.0, 40.0, 20.0]);
        assert_eq!(img.instances[1].bbox[2], 100.0);
        assert_eq!(img.instances[0].extra["note"], "kept");
        assert_eq!(img.extra["source"], "scan-7");
        assert_eq!(loaded.file.extra["producer"], "test");
    }

    #[test]
    fn canonical_text_round_trips_byte_for_byte() {
        let once = AnnotationFile::from_json_str(SAMPLE, FileKind::GroundTruth).unwrap().file;
        let text = once.to_canonical_json();
        let twice = AnnotationFile::from_json_str(&text, FileKind::GroundTruth).unwrap();
        assert!(twice.warnings.is_empty());
        assert_eq!(twice.file.to_canonical_json(), text);
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn pseudo_class_rejected_under_multi() {
        let text = SAMPLE.replace("\"class_id\": 1", "\"class_id\": 6");
        match AnnotationFile::from_json_str(&text, FileKind::GroundTruth) {
            Err(Error::Schema { record, path, .. }) => {
                assert_eq!(record, Some(0));
                assert_eq!(path, "images[0].instances[1].class_id");
            }
            other => panic!("{other:?}"),
        }
        let single = text.replace("\"multi\"", "\"single\"");
        assert!(AnnotationFile::from_json_str(&single, FileKind::GroundTruth).is_ok());
    }

    #[test]
    fn type_errors_report_path() {
        let text = SAMPLE.replace("\"class_id\": 2", "\"class_id\": \"row\"");
        match AnnotationFile::from_json_str(&text, FileKind::Detections) {
            Err(Error::Schema { record, path, .. }) => {
                assert_eq!(record, Some(0));
                assert_eq!(path, "images[0].instances[0].class_id");
            }
            other => panic!("{other:?}"),
        }
        let bad_mode = SAMPLE.replace("\"multi\"", "\"both\"");
        assert!(matches!(
            AnnotationFile::from_json_str(&bad_mode, FileKind::Detections),
            Err(Error::Schema { record: None, .. })
        ));
    }

    #[test]
    fn ground_truth_rules() {
        let scored = SAMPLE.replace("\"class_id\": 1", "\"class_id\": 1, \"score\": 0.5");
        assert!(AnnotationFile::from_json_str(&scored, FileKind::GroundTruth).is_err());
        assert!(AnnotationFile::from_json_str(&scored, FileKind::Detections).is_ok());
        let html = SAMPLE.replace("\"source\"", "\"html\": \"<table><tr>\", \"source\"");
        assert!(AnnotationFile::from_json_str(&html, FileKind::GroundTruth).is_err());
        let inverted = SAMPLE.replace("[10, 5, 120, 20]", "[10, 25, 120, 20]");
        assert!(AnnotationFile::from_json_str(&inverted, FileKind::Detections).is_err());
        let version = SAMPLE.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(AnnotationFile::from_json_str(&version, FileKind::Detections).is_err());
    }

    #[test]
    fn save_and_load_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.json");
        let file = AnnotationFile::from_json_str(SAMPLE, FileKind::GroundTruth).unwrap().file;
        file.save(&path).unwrap();
        let back = AnnotationFile::load(&path, FileKind::GroundTruth).unwrap();
        assert_eq!(back.file, file);
        assert_eq!(fs::read_to_string(&path).unwrap(), file.to_canonical_json());
        assert!(matches!(
            AnnotationFile::load(dir.path().join("missing.json"), FileKind::GroundTruth),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn annotation_set_conversion() {
        let file = AnnotationFile::from_json_str(SAMPLE, FileKind::GroundTruth).unwrap().file;
        let sets = file.annotation_sets().unwrap();
        assert_eq!(sets[0].instances.len(), 2);
        assert_eq!(sets[0].instances[0].class, ComponentClass::Row);
        let rec = ImageRecord::from_annotation_set(&sets[0], 100, 50);
        assert_eq!(rec.to_annotation_set(LabelMode::MultiLabel).unwrap(), sets[0]);
    }
}
