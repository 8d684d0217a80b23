//! COCO-style detection metrics over table components: AP averaged over
//! IoU thresholds, AP50/AP75, and size-bucketed AP.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{BBox, SizeBucket};
use crate::labelspace::{AnnotationSet, ComponentClass, ComponentInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    iou_thresholds: Vec<f64>,
    recall_levels: Vec<f64>,
    max_detections_per_image: usize,
}

impl Default for MatchConfig {
    /// Thresholds 0.50:0.05:0.95, 101 recall levels, 300 detections per image.
    fn default() -> Self {
        MatchConfig {
            iou_thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect(),
            recall_levels: default_recall_levels(),
            max_detections_per_image: 300,
        }
    }
}

pub fn default_recall_levels() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) / 100.0).collect()
}

impl MatchConfig {
    pub fn new(iou_thresholds: Vec<f64>, max_detections_per_image: usize) -> Result<Self> {
        if iou_thresholds.is_empty() {
            return Err(Error::Config("at least one IoU threshold is required".into()));
        }
        if !iou_thresholds.iter().all(|t| (0.0..=1.0).contains(t)) {
            return Err(Error::Config("IoU thresholds must lie in [0, 1]".into()));
        }
        if iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("IoU thresholds must be strictly increasing".into()));
        }
        if max_detections_per_image == 0 {
            return Err(Error::Config("max detections per image must be positive".into()));
        }
        Ok(MatchConfig {
            iou_thresholds,
            recall_levels: default_recall_levels(),
            max_detections_per_image,
        })
    }

    pub fn iou_thresholds(&self) -> &[f64] {
        &self.iou_thresholds
    }

    pub fn recall_levels(&self) -> &[f64] {
        &self.recall_levels
    }

    pub fn max_detections_per_image(&self) -> usize {
        self.max_detections_per_image
    }

    fn threshold_index(&self, value: f64) -> Option<usize> {
        self.iou_thresholds.iter().position(|t| (t - value).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    /// Matched an ignored ground truth, or unmatched and outside the
    /// evaluated size range. Counts neither way.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredMatch {
    pub pred_index: usize,
    pub score: f64,
    pub outcome: MatchOutcome,
}

impl ScoredMatch {
    pub fn is_tp(&self) -> bool {
        self.outcome == MatchOutcome::TruePositive
    }
}

fn scores_of(preds: &[ComponentInstance]) -> Result<Vec<f64>> {
    preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.confidence
                .ok_or_else(|| Error::InvalidInput(format!("prediction {i} ({}) has no confidence", p.class)))
        })
        .collect()
}

/// Prediction indices by descending score; equal scores keep input order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching for one class in one image. Results are in descending
/// score order. Each prediction takes the unmatched ground truth with the
/// highest IoU at or above the threshold (lowest index on ties), preferring
/// non-ignored ground truth.
fn match_with_ignore(
    boxes: &[BBox],
    scores: &[f64],
    gts: &[BBox],
    gt_ignored: &[bool],
    iou_threshold: f64,
    ignore_unmatched: impl Fn(&BBox) -> bool,
) -> Vec<ScoredMatch> {
    let mut taken = vec![false; gts.len()];
    ranked(scores)
        .into_iter()
        .map(|p| {
            let best_in = |want_ignored: bool| {
                let mut best: Option<(usize, f64)> = None;
                for (g, gt) in gts.iter().enumerate() {
                    if taken[g] || gt_ignored[g] != want_ignored {
                        continue;
                    }
                    let iou = boxes[p].iou(gt);
                    if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((g, iou));
                    }
                }
                best.map(|(g, _)| g)
            };
            let outcome = match best_in(false) {
                Some(g) => {
                    taken[g] = true;
                    MatchOutcome::TruePositive
                }
                None => match best_in(true) {
                    Some(g) => {
                        taken[g] = true;
                        MatchOutcome::Ignored
                    }
                    None if ignore_unmatched(&boxes[p]) => MatchOutcome::Ignored,
                    None => MatchOutcome::FalsePositive,
                },
            };
            ScoredMatch {
                pred_index: p,
                score: scores[p],
                outcome,
            }
        })
        .collect()
}

/// Labels each prediction TP or FP against the ground truth of one class in
/// one image. Output is in descending confidence order.
pub fn match_detections(
    preds: &[ComponentInstance],
    gts: &[ComponentInstance],
    iou_threshold: f64,
) -> Result<Vec<ScoredMatch>> {
    let scores = scores_of(preds)?;
    let boxes: Vec<BBox> = preds.iter().map(|p| p.bbox).collect();
    let gt_boxes: Vec<BBox> = gts.iter().map(|g| g.bbox).collect();
    Ok(match_with_ignore(
        &boxes,
        &scores,
        &gt_boxes,
        &vec![false; gts.len()],
        iou_threshold,
        |_| false,
    ))
}

/// 101-point interpolated AP of a TP/FP sequence already sorted by
/// descending confidence.
///
/// Returns `None` when there is neither ground truth nor any prediction;
/// predictions without ground truth score 0.
pub fn average_precision(tp_sequence: &[bool], n_ground_truth: usize, recall_levels: &[f64]) -> Result<Option<f64>> {
    let n_tp = tp_sequence.iter().filter(|t| **t).count();
    if n_tp > n_ground_truth {
        return Err(Error::InvalidInput(format!(
            "{n_tp} true positives exceed {n_ground_truth} ground truths"
        )));
    }
    if n_ground_truth == 0 {
        return Ok((!tp_sequence.is_empty()).then_some(0.0));
    }
    if recall_levels.is_empty() {
        return Err(Error::Config("no recall levels".into()));
    }

    let mut recall = Vec::with_capacity(tp_sequence.len());
    let mut precision = Vec::with_capacity(tp_sequence.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in tp_sequence {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_ground_truth as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let total: f64 = recall_levels
        .iter()
        .map(|&r| {
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    Ok(Some(total / recall_levels.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub mean_ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    /// Class AP averaged over thresholds; classes without ground truth or
    /// predictions are absent.
    pub per_class: BTreeMap<ComponentClass, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AreaRange {
    All,
    Only(SizeBucket),
}

/// Per-image inputs for one class, predictions ranked and truncated.
struct ClassImage {
    image_key: usize,
    boxes: Vec<BBox>,
    scores: Vec<f64>,
    gts: Vec<BBox>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn index_by_image<'a>(sets: &'a [AnnotationSet], what: &str) -> Result<BTreeMap<&'a str, &'a AnnotationSet>> {
    let mut map = BTreeMap::new();
    for set in sets {
        if map.insert(set.image_id.as_str(), set).is_some() {
            return Err(Error::Corpus {
                sample: set.image_id.clone(),
                message: format!("duplicate image in {what}"),
            });
        }
    }
    Ok(map)
}

/// Evaluates predictions against ground truth across a corpus. Images are
/// keyed by id, so the order of either list does not matter.
pub fn evaluate_corpus(preds: &[AnnotationSet], gts: &[AnnotationSet], cfg: &MatchConfig) -> Result<ApReport> {
    let pred_map = index_by_image(preds, "predictions")?;
    let gt_map = index_by_image(gts, "ground truth")?;
    if let Some(id) = pred_map.keys().find(|id| !gt_map.contains_key(*id)) {
        return Err(Error::Corpus {
            sample: id.to_string(),
            message: "image has predictions but no ground truth".into(),
        });
    }
    for set in pred_map.values() {
        scores_of(&set.instances).map_err(|e| Error::Corpus {
            sample: set.image_id.clone(),
            message: e.to_string(),
        })?;
    }

    // ap[class][range][threshold]
    let ranges = [
        AreaRange::All,
        AreaRange::Only(SizeBucket::Small),
        AreaRange::Only(SizeBucket::Medium),
        AreaRange::Only(SizeBucket::Large),
    ];
    let mut table: BTreeMap<ComponentClass, Vec<Vec<Option<f64>>>> = BTreeMap::new();
    for class in ComponentClass::ALL {
        let images: Vec<ClassImage> = gt_map
            .iter()
            .enumerate()
            .map(|(key, (id, gt))| {
                let mut preds: Vec<&ComponentInstance> = pred_map
                    .get(id)
                    .map(|p| p.of_class(class).collect())
                    .unwrap_or_default();
                // stable: ties keep file order
                preds.sort_by(|a, b| b.confidence.unwrap_or(0.0).total_cmp(&a.confidence.unwrap_or(0.0)));
                preds.truncate(cfg.max_detections_per_image);
                ClassImage {
                    image_key: key,
                    boxes: preds.iter().map(|p| p.bbox).collect(),
                    scores: preds.iter().map(|p| p.confidence.unwrap_or(0.0)).collect(),
                    gts: gt.of_class(class).map(|g| g.bbox).collect(),
                }
            })
            .collect();
        if images.iter().all(|im| im.boxes.is_empty() && im.gts.is_empty()) {
            continue;
        }

        let mut per_range = Vec::with_capacity(ranges.len());
        for range in ranges {
            let outside = |b: &BBox| match range {
                AreaRange::All => false,
                AreaRange::Only(bucket) => b.size_bucket() != bucket,
            };
            let mut per_threshold = Vec::with_capacity(cfg.iou_thresholds.len());
            for &thr in &cfg.iou_thresholds {
                let mut pooled: Vec<(f64, usize, usize, bool)> = Vec::new();
                let mut n_gt = 0;
                for im in &images {
                    let ignored: Vec<bool> = im.gts.iter().map(&outside).collect();
                    n_gt += ignored.iter().filter(|i| !**i).count();
                    let matches = match_with_ignore(&im.boxes, &im.scores, &im.gts, &ignored, thr, &outside);
                    for (rank, m) in matches.iter().enumerate() {
                        if m.outcome != MatchOutcome::Ignored {
                            pooled.push((m.score, im.image_key, rank, m.is_tp()));
                        }
                    }
                }
                pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                let seq: Vec<bool> = pooled.iter().map(|p| p.3).collect();
                per_threshold.push(average_precision(&seq, n_gt, &cfg.recall_levels)?);
            }
            per_range.push(per_threshold);
        }
        table.insert(class, per_range);
    }

    let class_mean = |range: usize, thresholds: &[usize]| -> BTreeMap<ComponentClass, f64> {
        table
            .iter()
            .filter_map(|(&class, per_range)| {
                mean(thresholds.iter().filter_map(|&t| per_range[range][t])).map(|m| (class, m))
            })
            .collect()
    };
    let all_thresholds: Vec<usize> = (0..cfg.iou_thresholds.len()).collect();
    let summary = |range: usize, thresholds: &[usize]| mean(class_mean(range, thresholds).into_values());
    let at = |value: f64| cfg.threshold_index(value).and_then(|t| summary(0, &[t]));

    Ok(ApReport {
        mean_ap: summary(0, &all_thresholds),
        ap50: at(0.5),
        ap75: at(0.75),
        ap_small: summary(1, &all_thresholds),
        ap_medium: summary(2, &all_thresholds),
        ap_large: summary(3, &all_thresholds),
        per_class: class_mean(0, &all_thresholds),
    })
}
