//! Axis-aligned box arithmetic in continuous pixel coordinates (origin top-left).

use std::fmt;

use crate::error::{Error, Result};

/// Area below which a box counts as small (32²).
pub const SMALL_AREA_LIMIT: f64 = 1024.0;
/// Area below which a non-small box counts as medium (64²).
pub const MEDIUM_AREA_LIMIT: f64 = 4096.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite coordinates and inverted corners.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateGeometry(format!(
                "non-finite coordinates ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::DegenerateGeometry(format!(
                "inverted corners ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self> {
        BBox::new(c[0], c[1], c[2], c[3])
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// True when the point lies in the closed box.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// True when `other` lies entirely inside this box.
    pub fn contains(&self, other: &BBox) -> bool {
        other.x1 >= self.x1 && other.y1 >= self.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    /// Overlap region, or `None` when the boxes do not touch.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x2 >= x1 && y2 >= y1).then_some(BBox { x1, y1, x2, y2 })
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        self.intersection(other).map_or(0.0, |b| b.area())
    }

    /// Smallest box enclosing both.
    pub fn hull(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Moves every side outward by `margin` (inward when negative).
    pub fn expand(&self, margin: f64) -> Result<BBox> {
        BBox::new(
            self.x1 - margin,
            self.y1 - margin,
            self.x2 + margin,
            self.y2 + margin,
        )
    }

    /// Coordinate-wise interpolation: `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn lerp(&self, other: &BBox, t: f64) -> BBox {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        BBox {
            x1: mix(self.x1, other.x1),
            y1: mix(self.y1, other.y1),
            x2: mix(self.x2, other.x2),
            y2: mix(self.y2, other.y2),
        }
    }

    /// All four coordinates within `tolerance` of each other.
    pub fn approx_eq(&self, other: &BBox, tolerance: f64) -> bool {
        (self.x1 - other.x1).abs() <= tolerance
            && (self.y1 - other.y1).abs() <= tolerance
            && (self.x2 - other.x2).abs() <= tolerance
            && (self.y2 - other.y2).abs() <= tolerance
    }

    /// Intersection over union. Zero-area unions, including two identical
    /// zero-area boxes, give 0.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Height over width.
    pub fn aspect_ratio(&self) -> Result<f64> {
        let w = self.width();
        if w <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "aspect ratio of zero-width box {self}"
            )));
        }
        Ok(self.height() / w)
    }

    pub fn size_bucket(&self) -> SizeBucket {
        SizeBucket::of_area(self.area())
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x1, self.y1, self.x2, self.y2)
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn aspect_ratio(b: &BBox) -> Result<f64> {
    b.aspect_ratio()
}

pub fn classify_size(b: &BBox) -> SizeBucket {
    b.size_bucket()
}

/// Object size class by area. Intervals are lower-closed: an area of exactly
/// 32² is medium and exactly 64² is large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn of_area(area: f64) -> Self {
        if area < SMALL_AREA_LIMIT {
            SizeBucket::Small
        } else if area < MEDIUM_AREA_LIMIT {
            SizeBucket::Medium
        } else {
            SizeBucket::Large
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(b(0., 0., 4., 4.).iou(&b(0., 0., 4., 4.)), 1.0);
        assert_eq!(b(0., 0., 1., 1.).iou(&b(5., 5., 6., 6.)), 0.0);
        let v = b(0., 0., 2., 2.).iou(&b(1., 1., 3., 3.));
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn iou_degenerate_boxes() {
        let p = b(3., 3., 3., 3.);
        assert_eq!(p.iou(&p), 0.0);
        let line = b(0., 0., 5., 0.);
        assert_eq!(line.iou(&b(0., 0., 5., 5.)), 0.0);
    }

    #[test]
    fn rejects_inverted_and_non_finite() {
        assert!(matches!(
            BBox::new(2., 0., 1., 1.),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(BBox::new(0., f64::NAN, 1., 1.).is_err());
    }

    #[test]
    fn size_buckets() {
        assert_eq!(classify_size(&b(0., 0., 10., 10.)), SizeBucket::Small);
        assert_eq!(classify_size(&b(0., 0., 50., 40.)), SizeBucket::Medium);
        assert_eq!(classify_size(&b(0., 0., 100., 100.)), SizeBucket::Large);
        // boundaries are lower-closed
        assert_eq!(classify_size(&b(0., 0., 32., 32.)), SizeBucket::Medium);
        assert_eq!(classify_size(&b(0., 0., 64., 64.)), SizeBucket::Large);
        assert_eq!(classify_size(&b(0., 0., 31.9, 32.)), SizeBucket::Small);
    }

    #[test]
    fn aspect_ratios() {
        assert_eq!(aspect_ratio(&b(0., 0., 10., 10.)).unwrap(), 1.0);
        assert_eq!(aspect_ratio(&b(0., 0., 100., 25.)).unwrap(), 0.25);
        assert_eq!(aspect_ratio(&b(0., 0., 4., 160.)).unwrap(), 40.0);
        assert!(matches!(
            aspect_ratio(&b(2., 0., 2., 9.)),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.0..80.0f64, 0.0..80.0f64)
            .prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let ab = a.iou(&c);
            prop_assert_eq!(ab, c.iou(&a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assume!(a.area() > 0.0);
            prop_assert_eq!(a.iou(&a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), c in arb_box(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
            let moved = a.translate(dx, dy).iou(&c.translate(dx, dy));
            prop_assert!((moved - a.iou(&c)).abs() < 1e-9);
        }

        #[test]
        fn buckets_partition(area in 0.0..20000.0f64) {
            let bucket = SizeBucket::of_area(area);
            let hits = [area < 1024.0, (1024.0..4096.0).contains(&area), area >= 4096.0];
            prop_assert_eq!(hits.iter().filter(|h| **h).count(), 1);
            prop_assert_eq!(hits.iter().position(|h| *h).unwrap(), SizeBucket::ALL.iter().position(|s| *s == bucket).unwrap());
        }
    }
}
