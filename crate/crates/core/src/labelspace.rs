//! Table-component classes and the pseudo-class transform between the
//! multi-label and single-label formulations.
//!
//! In the multi-label formulation a Row may share its box with a Projected
//! Row Header or a Column Header. The single-label formulation drops Rows
//! that coincide with a Projected Row Header and replaces a coincident
//! Row/Column Header pair with one `PseudoHeaderRow`. Decoding reverses this
//! by duplicating predictions.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Default per-coordinate tolerance, in pixels, for treating two boxes as the same box.
pub const DEFAULT_BOX_MATCH_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ComponentClass {
    Table = 0,
    Column = 1,
    Row = 2,
    SpanningCell = 3,
    ProjectedRowHeader = 4,
    ColumnHeader = 5,
    PseudoHeaderRow = 6,
}

impl ComponentClass {
    pub const ALL: [ComponentClass; 7] = [
        ComponentClass::Table,
        ComponentClass::Column,
        ComponentClass::Row,
        ComponentClass::SpanningCell,
        ComponentClass::ProjectedRowHeader,
        ComponentClass::ColumnHeader,
        ComponentClass::PseudoHeaderRow,
    ];

    /// The six classes of the multi-label formulation.
    pub const MULTI_LABEL: [ComponentClass; 6] = [
        ComponentClass::Table,
        ComponentClass::Column,
        ComponentClass::Row,
        ComponentClass::SpanningCell,
        ComponentClass::ProjectedRowHeader,
        ComponentClass::ColumnHeader,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentClass::Table => "Table",
            ComponentClass::Column => "Column",
            ComponentClass::Row => "Row",
            ComponentClass::SpanningCell => "Spanning Cell",
            ComponentClass::ProjectedRowHeader => "Projected Row Header",
            ComponentClass::ColumnHeader => "Column Header",
            ComponentClass::PseudoHeaderRow => "Pseudo Header Row",
        }
    }

    pub fn allowed_in(self, mode: LabelMode) -> bool {
        match mode {
            LabelMode::MultiLabel => self != ComponentClass::PseudoHeaderRow,
            LabelMode::SingleLabel => true,
        }
    }
}

impl fmt::Display for ComponentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelMode {
    MultiLabel,
    SingleLabel,
}

impl LabelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::MultiLabel => "multi",
            LabelMode::SingleLabel => "single",
        }
    }
}

/// A box with a component class. Ground truth carries no confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentInstance {
    pub bbox: BBox,
    pub class: ComponentClass,
    pub confidence: Option<f64>,
}

impl ComponentInstance {
    pub fn ground_truth(bbox: BBox, class: ComponentClass) -> Self {
        ComponentInstance {
            bbox,
            class,
            confidence: None,
        }
    }

    pub fn predicted(bbox: BBox, class: ComponentClass, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidInput(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(ComponentInstance {
            bbox,
            class,
            confidence: Some(confidence),
        })
    }

    fn with_class(&self, class: ComponentClass) -> Self {
        ComponentInstance { class, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub image_id: String,
    pub instances: Vec<ComponentInstance>,
    pub mode: LabelMode,
}

impl AnnotationSet {
    pub fn new(
        image_id: impl Into<String>,
        instances: Vec<ComponentInstance>,
        mode: LabelMode,
    ) -> Self {
        AnnotationSet {
            image_id: image_id.into(),
            instances,
            mode,
        }
    }

    pub fn of_class(&self, class: ComponentClass) -> impl Iterator<Item = &ComponentInstance> {
        self.instances.iter().filter(move |i| i.class == class)
    }

    fn expect_mode(&self, expected: LabelMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::Mode {
                expected: expected.as_str(),
                found: self.mode.as_str(),
            });
        }
        Ok(())
    }

    /// Checks the single-label constraint: no two instances of distinct
    /// classes share a box (within `tolerance`).
    pub fn validate_single_label(&self, tolerance: f64) -> Result<()> {
        self.expect_mode(LabelMode::SingleLabel)?;
        let clashes = distinct_class_clashes(&self.instances, tolerance);
        if clashes.is_empty() {
            Ok(())
        } else {
            Err(consistency_error(&self.image_id, &self.instances, &clashes))
        }
    }
}

fn distinct_class_clashes(instances: &[ComponentInstance], tolerance: f64) -> Vec<(usize, usize)> {
    let mut clashes = Vec::new();
    for (i, a) in instances.iter().enumerate() {
        for (j, b) in instances.iter().enumerate().skip(i + 1) {
            if a.class != b.class && a.bbox.approx_eq(&b.bbox, tolerance) {
                clashes.push((i, j));
            }
        }
    }
    clashes
}

fn consistency_error(
    image_id: &str,
    instances: &[ComponentInstance],
    clashes: &[(usize, usize)],
) -> Error {
    let detail = clashes
        .iter()
        .map(|&(i, j)| {
            format!(
                "{} #{i} and {} #{j} share box {}",
                instances[i].class, instances[j].class, instances[i].bbox
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Error::Consistency {
        image_id: image_id.to_string(),
        detail,
    }
}

/// Multi-label ground truth to single-label ground truth.
///
/// Rows coinciding with a Projected Row Header are dropped first; each
/// remaining Row is then paired with at most one coincident Column Header
/// and the pair becomes a `PseudoHeaderRow` carrying the Row's box, placed
/// at the Row's position. Any other distinct-class coincidence left after
/// both rewrites is reported as a consistency error.
pub fn encode_pseudo(gt: &AnnotationSet, box_match_tolerance: f64) -> Result<AnnotationSet> {
    gt.expect_mode(LabelMode::MultiLabel)?;
    let tol = box_match_tolerance;
    let items = &gt.instances;

    let projected: Vec<&BBox> = gt
        .of_class(ComponentClass::ProjectedRowHeader)
        .map(|i| &i.bbox)
        .collect();

    let mut dropped = vec![false; items.len()];
    for (i, inst) in items.iter().enumerate() {
        if inst.class == ComponentClass::Row && projected.iter().any(|p| p.approx_eq(&inst.bbox, tol)) {
            dropped[i] = true;
        }
    }

    // row index -> paired column header index
    let mut paired_header = vec![None; items.len()];
    let mut header_used = vec![false; items.len()];
    for (i, row) in items.iter().enumerate() {
        if row.class != ComponentClass::Row || dropped[i] {
            continue;
        }
        let partner = items.iter().enumerate().find(|(j, h)| {
            h.class == ComponentClass::ColumnHeader
                && !header_used[*j]
                && h.bbox.approx_eq(&row.bbox, tol)
        });
        if let Some((j, _)) = partner {
            header_used[j] = true;
            paired_header[i] = Some(j);
        }
    }

    let mut out = Vec::with_capacity(items.len());
    for (i, inst) in items.iter().enumerate() {
        if dropped[i] || header_used[i] {
            continue;
        }
        if paired_header[i].is_some() {
            out.push(inst.with_class(ComponentClass::PseudoHeaderRow));
        } else {
            out.push(*inst);
        }
    }

    let clashes = distinct_class_clashes(&out, tol);
    if !clashes.is_empty() {
        return Err(consistency_error(&gt.image_id, &out, &clashes));
    }
    Ok(AnnotationSet::new(gt.image_id.clone(), out, LabelMode::SingleLabel))
}

/// Single-label predictions back to the multi-label formulation.
///
/// Each Projected Row Header is kept and duplicated once as a Row; each
/// `PseudoHeaderRow` is replaced by a Row and a Column Header with the same
/// box and confidence.
pub fn decode_pseudo(pred: &AnnotationSet) -> Result<AnnotationSet> {
    pred.expect_mode(LabelMode::SingleLabel)?;
    let with_conf = pred.instances.iter().filter(|i| i.confidence.is_some()).count();
    if with_conf != 0 && with_conf != pred.instances.len() {
        return Err(Error::InvalidInput(format!(
            "image {}: confidences must be present on all instances or none",
            pred.image_id
        )));
    }

    let mut out = Vec::with_capacity(pred.instances.len() * 2);
    for inst in &pred.instances {
        match inst.class {
            ComponentClass::ProjectedRowHeader => {
                out.push(*inst);
                out.push(inst.with_class(ComponentClass::Row));
            }
            ComponentClass::PseudoHeaderRow => {
                out.push(inst.with_class(ComponentClass::Row));
                out.push(inst.with_class(ComponentClass::ColumnHeader));
            }
            _ => out.push(*inst),
        }
    }
    Ok(AnnotationSet::new(pred.image_id.clone(), out, LabelMode::MultiLabel))
}
