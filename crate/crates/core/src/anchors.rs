//! Corpus statistics (object counts, folded aspect ratios) and region
//! proposal anchor generation with ground-truth coverage analysis.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::labelspace::AnnotationSet;

/// Aspect ratios (height / width) tuned to table components.
pub const TABLE_ASPECT_RATIOS: [f64; 13] = [
    0.0125, 0.025, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0, 80.0,
];

/// The usual detector default.
pub const COMMON_ASPECT_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];

pub const DEFAULT_STRIDES: [u32; 5] = [4, 8, 16, 32, 64];

/// Folded ratios at or above this value share the open top bucket.
pub const HISTOGRAM_TOP_BUCKET: u32 = 140;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_images: usize,
    pub n_objects: usize,
    pub avg_objects_per_image: f64,
    /// Integer-width buckets keyed by lower edge, `1..=140`.
    pub folded_aspect_ratio_histogram: BTreeMap<u32, u64>,
}

pub fn average_objects_per_image(n_images: usize, n_objects: usize) -> Result<f64> {
    if n_images == 0 {
        return Err(Error::InvalidInput("no images".into()));
    }
    Ok(n_objects as f64 / n_images as f64)
}

/// `max(r, 1/r)`.
pub fn fold_ratio(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("aspect ratio {r} is not a positive number")));
    }
    Ok(r.max(1.0 / r))
}

pub fn ratio_bucket(folded: f64) -> u32 {
    (folded.floor() as u32).clamp(1, HISTOGRAM_TOP_BUCKET)
}

pub fn dataset_stats(annotations: &[AnnotationSet]) -> Result<DatasetStats> {
    let n_images = annotations.len();
    let n_objects = annotations.iter().map(|a| a.instances.len()).sum();
    let avg_objects_per_image = average_objects_per_image(n_images, n_objects)?;
    let mut hist = BTreeMap::new();
    for inst in annotations.iter().flat_map(|a| &a.instances) {
        let b = inst.bbox;
        if b.width() <= 0.0 || b.height() <= 0.0 {
            continue;
        }
        let folded = fold_ratio(b.height() / b.width())?;
        *hist.entry(ratio_bucket(folded)).or_insert(0) += 1;
    }
    Ok(DatasetStats {
        n_images,
        n_objects,
        avg_objects_per_image,
        folded_aspect_ratio_histogram: hist,
    })
}

impl DatasetStats {
    /// Histogram as CSV: header `bucket,count`, one line per non-empty bucket.
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["bucket", "count"])?;
        for (bucket, count) in &self.folded_aspect_ratio_histogram {
            w.write_record([bucket.to_string(), count.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub stride: u32,
    /// Anchor side length at ratio 1, in pixels.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    aspect_ratios: Vec<f64>,
    levels: Vec<PyramidLevel>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig::with_ratios(TABLE_ASPECT_RATIOS.to_vec()).expect("built-in ratios are valid")
    }
}

impl AnchorConfig {
    pub fn new(aspect_ratios: Vec<f64>, levels: Vec<PyramidLevel>) -> Result<Self> {
        if aspect_ratios.is_empty() || levels.is_empty() {
            return Err(Error::Config("anchor config needs ratios and pyramid levels".into()));
        }
        if !aspect_ratios.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(Error::Config("aspect ratios must be positive".into()));
        }
        if aspect_ratios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("aspect ratios must be sorted ascending without repeats".into()));
        }
        for level in &levels {
            if level.stride == 0 || level.scales.is_empty() || !level.scales.iter().all(|s| *s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("invalid pyramid level {level:?}")));
            }
        }
        Ok(AnchorConfig { aspect_ratios, levels })
    }

    /// Default pyramid (strides 4..64, one scale of 8 x stride per level).
    pub fn with_ratios(aspect_ratios: Vec<f64>) -> Result<Self> {
        let levels = DEFAULT_STRIDES
            .iter()
            .map(|&stride| PyramidLevel {
                stride,
                scales: vec![8.0 * f64::from(stride)],
            })
            .collect();
        AnchorConfig::new(aspect_ratios, levels)
    }

    pub fn aspect_ratios(&self) -> &[f64] {
        &self.aspect_ratios
    }

    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    /// Feature map `(height, width)` per level for an image.
    pub fn feature_map_sizes(&self, image_width: f64, image_height: f64) -> Vec<(usize, usize)> {
        self.levels
            .iter()
            .map(|l| {
                let s = f64::from(l.stride);
                ((image_height / s).ceil() as usize, (image_width / s).ceil() as usize)
            })
            .collect()
    }
}

/// Box centered at `(cx, cy)` with area `scale²` and height/width `ratio`.
pub fn anchor_box(cx: f64, cy: f64, scale: f64, ratio: f64) -> BBox {
    let root = ratio.sqrt();
    let (w, h) = (scale / root, scale * root);
    BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0).expect("positive anchor extent")
}

/// Anchors for every level, position, scale and ratio, in that nesting
/// order. Position `(i, j)` is centered at `((j + 0.5) * stride, (i + 0.5) * stride)`.
pub fn generate_anchors(cfg: &AnchorConfig, feature_map_sizes: &[(usize, usize)]) -> Result<Vec<BBox>> {
    if feature_map_sizes.len() != cfg.levels.len() {
        return Err(Error::Config(format!(
            "{} feature maps for {} pyramid levels",
            feature_map_sizes.len(),
            cfg.levels.len()
        )));
    }
    let total: usize = feature_map_sizes
        .iter()
        .zip(&cfg.levels)
        .map(|((h, w), l)| h * w * l.scales.len() * cfg.aspect_ratios.len())
        .sum();
    let mut out = Vec::with_capacity(total);
    for (&(h, w), level) in feature_map_sizes.iter().zip(&cfg.levels) {
        let stride = f64::from(level.stride);
        for i in 0..h {
            for j in 0..w {
                let (cx, cy) = ((j as f64 + 0.5) * stride, (i as f64 + 0.5) * stride);
                for &s in &level.scales {
                    for &r in &cfg.aspect_ratios {
                        out.push(anchor_box(cx, cy, s, r));
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub fraction_iou_50: f64,
    pub fraction_iou_70: f64,
    pub mean_best_iou: f64,
}

impl Coverage {
    /// Summarizes per-ground-truth best IoUs, e.g. pooled over several images.
    pub fn from_best_ious(best: &[f64]) -> Result<Coverage> {
        if best.is_empty() {
            return Err(Error::InvalidInput("no ground-truth boxes".into()));
        }
        let n = best.len() as f64;
        Ok(Coverage {
            fraction_iou_50: best.iter().filter(|v| **v >= 0.5).count() as f64 / n,
            fraction_iou_70: best.iter().filter(|v| **v >= 0.7).count() as f64 / n,
            mean_best_iou: best.iter().sum::<f64>() / n,
        })
    }
}

/// Best IoU of each ground truth over an explicit anchor list.
pub fn best_anchor_ious(anchors: &[BBox], gts: &[BBox]) -> Result<Vec<f64>> {
    if anchors.is_empty() {
        return Err(Error::InvalidInput("empty anchor list".into()));
    }
    Ok(gts
        .iter()
        .map(|g| anchors.iter().map(|a| a.iou(g)).fold(0.0, f64::max))
        .collect())
}

/// Coverage of ground truths by an explicit anchor list.
pub fn anchor_coverage(anchors: &[BBox], gts: &[BBox]) -> Result<Coverage> {
    Coverage::from_best_ious(&best_anchor_ious(anchors, gts)?)
}

/// Best IoU of each ground truth over the anchor grid of one image, without
/// materializing the grid.
///
/// For a fixed anchor shape the overlap along each axis never increases as
/// the center moves away from the ground-truth center, so only the grid
/// center nearest to it (per axis, clamped to the map) needs checking.
pub fn grid_best_ious(cfg: &AnchorConfig, image_width: f64, image_height: f64, gts: &[BBox]) -> Vec<f64> {
    let sizes = cfg.feature_map_sizes(image_width, image_height);
    gts.iter()
        .map(|g| {
            let (gx, gy) = g.center();
            let mut best = 0.0f64;
            for (&(h, w), level) in sizes.iter().zip(&cfg.levels) {
                if h == 0 || w == 0 {
                    continue;
                }
                let stride = f64::from(level.stride);
                let nearest = |c: f64, n: usize| ((c / stride).floor().max(0.0) as usize).min(n - 1);
                let cx = (nearest(gx, w) as f64 + 0.5) * stride;
                let cy = (nearest(gy, h) as f64 + 0.5) * stride;
                for &s in &level.scales {
                    for &r in &cfg.aspect_ratios {
                        best = best.max(anchor_box(cx, cy, s, r).iou(g));
                    }
                }
            }
            best
        })
        .collect()
}

pub fn grid_coverage(cfg: &AnchorConfig, image_width: f64, image_height: f64, gts: &[BBox]) -> Result<Coverage> {
    Coverage::from_best_ious(&grid_best_ious(cfg, image_width, image_height, gts))
}

/// Random boxes shaped like table components: folded aspect ratio
/// log-uniform in `[min_ratio, max_ratio]`, wide (row-like) or tall
/// (column-like) with equal odds, side of the equal-area square in
/// `[32, 256]`, fully inside the image.
pub fn sample_table_like_boxes(
    count: usize,
    image_size: f64,
    min_ratio: f64,
    max_ratio: f64,
    seed: u64,
) -> Vec<BBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let folded = (rng.gen_range(min_ratio.ln()..=max_ratio.ln())).exp();
        let side: f64 = rng.gen_range(32.0..=256.0);
        let (w, h) = if rng.gen_bool(0.5) {
            (side * folded.sqrt(), side / folded.sqrt())
        } else {
            (side / folded.sqrt(), side * folded.sqrt())
        };
        if w >= image_size || h >= image_size {
            continue;
        }
        let x = rng.gen_range(0.0..image_size - w);
        let y = rng.gen_range(0.0..image_size - h);
        out.push(BBox::new(x, y, x + w, y + h).expect("positive extent"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::{ComponentClass, ComponentInstance, LabelMode};
    use proptest::prelude::*;

    #[test]
    fn folding() {
        assert_eq!(fold_ratio(0.25).unwrap(), 4.0);
        assert_eq!(fold_ratio(1.0).unwrap(), 1.0);
        assert_eq!(fold_ratio(40.0).unwrap(), 40.0);
        assert!(fold_ratio(0.0).is_err());
        assert!(fold_ratio(-2.0).is_err());
    }

    #[test]
    fn averages() {
        assert!((average_objects_per_image(78537, 1628298).unwrap() - 20.73).abs() < 0.01);
        assert!((average_objects_per_image(118287, 860001).unwrap() - 7.27).abs() < 0.01);
        assert!(dataset_stats(&[]).is_err());
    }

    #[test]
    fn stats_on_two_images() {
        let b = |w: f64, h: f64| ComponentInstance::ground_truth(BBox::new(0., 0., w, h).unwrap(), ComponentClass::Row);
        let sets = vec![
            AnnotationSet::new("a", vec![b(100., 10.), b(10., 10.), b(5., 0.)], LabelMode::MultiLabel),
            AnnotationSet::new("b", vec![b(10., 400.); 4].into_iter().chain([b(1000., 1.)]).collect(), LabelMode::MultiLabel),
        ];
        let s = dataset_stats(&sets).unwrap();
        assert_eq!((s.n_images, s.n_objects), (2, 8));
        assert_eq!(s.avg_objects_per_image, 4.0);
        let hist: Vec<(u32, u64)> = s.folded_aspect_ratio_histogram.into_iter().collect();
        // the zero-height box is not counted
        assert_eq!(hist, vec![(1, 1), (10, 1), (40, 4), (140, 1)]);
    }

    #[test]
    fn histogram_csv() {
        let mut hist = BTreeMap::new();
        hist.insert(1, 3);
        hist.insert(12, 1);
        let s = DatasetStats {
            n_images: 1,
            n_objects: 4,
            avg_objects_per_image: 4.0,
            folded_aspect_ratio_histogram: hist,
        };
        let mut buf = Vec::new();
        s.write_histogram_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bucket,count\n1,3\n12,1\n");
    }

    #[test]
    fn anchor_shapes() {
        let a = anchor_box(16., 16., 32., 1.0);
        assert_eq!(a.to_array(), [0., 0., 32., 32.]);
        let tall = anchor_box(0., 0., 32., 4.0);
        assert_eq!((tall.width(), tall.height()), (16.0, 64.0));
    }

    #[test]
    fn anchor_count() {
        let cfg = AnchorConfig::new(
            TABLE_ASPECT_RATIOS.to_vec(),
            vec![PyramidLevel {
                stride: 16,
                scales: vec![64.0],
            }],
        )
        .unwrap();
        assert_eq!(generate_anchors(&cfg, &[(2, 2)]).unwrap().len(), 52);
        assert!(generate_anchors(&cfg, &[(2, 2), (1, 1)]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AnchorConfig::with_ratios(vec![2.0, 1.0]).is_err());
        assert!(AnchorConfig::with_ratios(vec![0.0, 1.0]).is_err());
        assert!(AnchorConfig::with_ratios(vec![]).is_err());
        assert_eq!(AnchorConfig::default().aspect_ratios().len(), 13);
    }

    #[test]
    fn coverage_of_identical_sets() {
        let boxes = vec![BBox::new(0., 0., 10., 10.).unwrap(), BBox::new(5., 5., 50., 9.).unwrap()];
        let c = anchor_coverage(&boxes, &boxes).unwrap();
        assert_eq!((c.fraction_iou_50, c.fraction_iou_70, c.mean_best_iou), (1.0, 1.0, 1.0));
        assert!(anchor_coverage(&[], &boxes).is_err());
    }

    #[test]
    fn extreme_ratio_needs_extended_list() {
        // ratio 40: 20 wide, 800 tall, centered on a stride-16 grid point
        let gt = [BBox::new(94., 200., 114., 1000.).unwrap()];
        let sizes = |cfg: &AnchorConfig| cfg.feature_map_sizes(1024., 1024.);
        let common = AnchorConfig::with_ratios(COMMON_ASPECT_RATIOS.to_vec()).unwrap();
        let table = AnchorConfig::default();
        let best = |cfg: &AnchorConfig| best_anchor_ious(&generate_anchors(cfg, &sizes(cfg)).unwrap(), &gt).unwrap()[0];
        assert!(best(&common) < 0.5, "{}", best(&common));
        assert!(best(&table) >= 0.5, "{}", best(&table));
    }

    proptest! {
        #[test]
        fn fold_symmetric(r in 1e-3..1e3f64) {
            prop_assert!((fold_ratio(r).unwrap() - fold_ratio(1.0 / r).unwrap()).abs() <= 1e-12 * r.max(1.0 / r));
        }

        #[test]
        fn anchors_have_requested_shape(s in 1.0..600.0f64, r in 0.01..100.0f64) {
            let a = anchor_box(100.0, 100.0, s, r);
            prop_assert!((a.area() - s * s).abs() <= 1e-6 * s * s);
            prop_assert!((a.height() / a.width() - r).abs() <= 1e-6 * r);
        }
    }
}
