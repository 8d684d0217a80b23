//! Table structure recognition as object detection: component geometry,
//! pseudo-class label transforms, rule-based HTML reconstruction, and the
//! two evaluation views (COCO-style AP over components, structure-only
//! TEDS over reconstructed tables).

pub mod anchors;
pub mod cocoeval;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod kernels;
pub mod labelspace;
pub mod misalign;
pub mod reconstruct;
pub mod teds;

pub use error::{Error, Result};
pub use geometry::{BBox, SizeBucket};
pub use labelspace::{AnnotationSet, ComponentClass, ComponentInstance, LabelMode};
