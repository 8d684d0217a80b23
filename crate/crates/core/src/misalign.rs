//! Synthetic "predictions" made by perturbing ground truth, scored under both
//! COCO-style mAP and structure-only TEDS to show the two can disagree.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cocoeval::{evaluate_corpus, MatchConfig};
use crate::error::{Error, Result};
use crate::formats::{AnnotationFile, FixtureSpec, ImageRecord};
use crate::geometry::BBox;
use crate::labelspace::{AnnotationSet, ComponentClass, ComponentInstance, LabelMode};
use crate::reconstruct::{build_grid, grid_to_html, ReconstructionConfig};
use crate::teds::{corpus_teds, TedsPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PerturbationMode {
    /// Grow each box outward by `magnitude` pixels.
    Dilate,
    /// Cut `magnitude` pixels from every side.
    Shrink,
    /// Move each box a fraction `magnitude ∈ [0, 1]` of the way to its content extent.
    SnapToMinimal,
    /// Replace `magnitude` disjoint pairs of vertically adjacent Rows with their unions.
    MergeAdjacent,
}

impl PerturbationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationMode::Dilate => "dilate",
            PerturbationMode::Shrink => "shrink",
            PerturbationMode::SnapToMinimal => "snap",
            PerturbationMode::MergeAdjacent => "merge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub mode: PerturbationMode,
    pub magnitude: f64,
    pub target_classes: BTreeSet<ComponentClass>,
    pub seed: u64,
}

impl PerturbationSpec {
    /// Targets all six multi-label classes.
    pub fn new(mode: PerturbationMode, magnitude: f64) -> Self {
        PerturbationSpec {
            mode,
            magnitude,
            target_classes: ComponentClass::MULTI_LABEL.into_iter().collect(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_targets(mut self, classes: impl IntoIterator<Item = ComponentClass>) -> Self {
        self.target_classes = classes.into_iter().collect();
        self
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.mode.as_str(), self.magnitude)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(Error::Config(format!("magnitude {} must be finite and >= 0", self.magnitude)));
        }
        match self.mode {
            PerturbationMode::SnapToMinimal if self.magnitude > 1.0 => Err(Error::Config(format!(
                "snap fraction {} must lie in [0, 1]",
                self.magnitude
            ))),
            PerturbationMode::MergeAdjacent if self.magnitude.fract() != 0.0 => Err(Error::Config(format!(
                "merge count {} must be a whole number",
                self.magnitude
            ))),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for PerturbationSpec {
    type Err = Error;

    /// `mode:magnitude[:seed]`, e.g. `dilate:2`, `snap:1`, `merge:1:42`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("perturbation `{s}` is not mode:magnitude[:seed]"));
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let mode = match parts[0] {
            "dilate" => PerturbationMode::Dilate,
            "shrink" => PerturbationMode::Shrink,
            "snap" => PerturbationMode::SnapToMinimal,
            "merge" => PerturbationMode::MergeAdjacent,
            _ => return Err(bad()),
        };
        let magnitude: f64 = parts[1].parse().map_err(|_| bad())?;
        let seed = match parts.get(2) {
            Some(p) => p.parse().map_err(|_| bad())?,
            None => 0,
        };
        let spec = PerturbationSpec::new(mode, magnitude).with_seed(seed);
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// One ground-truth table with per-instance content extents and its HTML.
#[derive(Debug, Clone, PartialEq)]
pub struct MisalignFixture {
    pub ground_truth: AnnotationSet,
    pub content_extents: Vec<BBox>,
    pub html: String,
}

impl MisalignFixture {
    pub fn from_record(rec: &ImageRecord) -> Result<Self> {
        let missing = |what: &str| Error::Corpus {
            sample: rec.image_id.clone(),
            message: format!("misalignment fixtures need {what}"),
        };
        let content_extents = rec.content_extents().ok_or_else(|| missing("a content extent on every instance"))?;
        let html = rec.html.clone().ok_or_else(|| missing("ground-truth html"))?;
        Ok(MisalignFixture {
            ground_truth: rec.to_annotation_set(LabelMode::MultiLabel)?,
            content_extents,
            html,
        })
    }

    pub fn from_file(file: &AnnotationFile) -> Result<Vec<Self>> {
        if file.mode() != LabelMode::MultiLabel {
            return Err(Error::Mode {
                expected: LabelMode::MultiLabel.as_str(),
                found: file.mode().as_str(),
            });
        }
        file.images.iter().map(MisalignFixture::from_record).collect()
    }
}

/// Fixture spec for the misalignment experiment: boxes larger than their
/// content, at a scale where a one-pixel change is a small IoU change.
pub fn misalign_fixture_spec(seed: u64) -> FixtureSpec {
    FixtureSpec {
        n_tables: 12,
        min_rows: 4,
        max_rows: 8,
        min_cols: 2,
        max_cols: 5,
        span_probability: 0.5,
        header_probability: 1.0,
        projected_row_probability: 0.2,
        min_scale: 1.0,
        max_scale: 1.5,
        seed,
    }
}

fn shrink(b: &BBox, m: f64) -> Result<BBox> {
    if 2.0 * m >= b.width() || 2.0 * m >= b.height() {
        return Err(Error::DegenerateGeometry(format!("shrinking {b} by {m} leaves no area")));
    }
    b.expand(-m)
}

fn merge_rows(instances: &mut Vec<ComponentInstance>, pairs: usize, seed: u64) -> Result<()> {
    let mut rows: Vec<usize> = instances
        .iter()
        .enumerate()
        .filter(|(_, i)| i.class == ComponentClass::Row)
        .map(|(k, _)| k)
        .collect();
    rows.sort_by(|&a, &b| {
        let (p, q) = (instances[a].bbox.to_array(), instances[b].bbox.to_array());
        p[1].total_cmp(&q[1]).then(p[3].total_cmp(&q[3]))
    });
    let mut candidates: Vec<usize> = (0..rows.len().saturating_sub(1)).collect();
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut used = BTreeSet::new();
    let mut merged = Vec::new();
    for p in candidates {
        if merged.len() == pairs {
            break;
        }
        if used.contains(&p) || used.contains(&(p + 1)) {
            continue;
        }
        used.extend([p, p + 1]);
        merged.push((rows[p], rows[p + 1]));
    }
    let mut drop = BTreeSet::new();
    for (a, b) in merged {
        instances[a].bbox = instances[a].bbox.hull(&instances[b].bbox);
        drop.insert(b);
    }
    let mut k = 0;
    instances.retain(|_| {
        k += 1;
        !drop.contains(&(k - 1))
    });
    Ok(())
}

/// Perturbs the targeted ground-truth boxes; every output box scores 1.0.
pub fn perturb(fixture: &MisalignFixture, spec: &PerturbationSpec) -> Result<AnnotationSet> {
    spec.validate()?;
    let gt = &fixture.ground_truth;
    if gt.mode != LabelMode::MultiLabel {
        return Err(Error::Mode {
            expected: LabelMode::MultiLabel.as_str(),
            found: gt.mode.as_str(),
        });
    }
    if fixture.content_extents.len() != gt.instances.len() {
        return Err(Error::InvalidInput(format!(
            "{} content extents for {} instances",
            fixture.content_extents.len(),
            gt.instances.len()
        )));
    }
    let m = spec.magnitude;
    let mut out = Vec::with_capacity(gt.instances.len());
    for (inst, extent) in gt.instances.iter().zip(&fixture.content_extents) {
        let targeted = spec.target_classes.contains(&inst.class);
        let bbox = match spec.mode {
            _ if !targeted || m == 0.0 => inst.bbox,
            PerturbationMode::Dilate => inst.bbox.expand(m)?,
            PerturbationMode::Shrink => shrink(&inst.bbox, m)?,
            PerturbationMode::SnapToMinimal => inst.bbox.lerp(extent, m),
            PerturbationMode::MergeAdjacent => inst.bbox,
        };
        out.push(ComponentInstance::predicted(bbox, inst.class, 1.0)?);
    }
    if spec.mode == PerturbationMode::MergeAdjacent && spec.target_classes.contains(&ComponentClass::Row) {
        merge_rows(&mut out, m as usize, spec.seed)?;
    }
    Ok(AnnotationSet::new(gt.image_id.clone(), out, LabelMode::MultiLabel))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub spec: PerturbationSpec,
    /// COCO mAP over all classes; 0 when nothing could be scored.
    pub mean_ap: f64,
    pub teds: f64,
}

/// Scores every spec, in the order given, against the same fixtures.
pub fn misalignment_report(fixtures: &[MisalignFixture], specs: &[PerturbationSpec]) -> Result<Vec<ReportRow>> {
    let gts: Vec<AnnotationSet> = fixtures.iter().map(|f| f.ground_truth.clone()).collect();
    let match_cfg = MatchConfig::default();
    let rec_cfg = ReconstructionConfig::default();
    specs
        .iter()
        .map(|spec| {
            let preds = fixtures.iter().map(|f| perturb(f, spec)).collect::<Result<Vec<_>>>()?;
            let ap = evaluate_corpus(&preds, &gts, &match_cfg)?;
            let pairs: Vec<TedsPair> = preds
                .iter()
                .zip(fixtures)
                .map(|(p, f)| TedsPair {
                    sample_id: p.image_id.clone(),
                    // An unreconstructable prediction scores 0 as unparsable html.
                    predicted_html: build_grid(p, &rec_cfg).map(|g| grid_to_html(&g)).unwrap_or_default(),
                    ground_truth_html: f.html.clone(),
                })
                .collect();
            let teds = corpus_teds(&pairs)?;
            Ok(ReportRow {
                spec: spec.clone(),
                mean_ap: ap.mean_ap.unwrap_or(0.0),
                teds: teds.overall_mean.unwrap_or(0.0),
            })
        })
        .collect()
}

/// CSV with header `spec,mode,magnitude,seed,map,teds`.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["spec", "mode", "magnitude", "seed", "map", "teds"])?;
    for r in rows {
        w.write_record([
            r.spec.label(),
            r.spec.mode.as_str().to_string(),
            r.spec.magnitude.to_string(),
            r.spec.seed.to_string(),
            format!("{:.6}", r.mean_ap),
            format!("{:.6}", r.teds),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::generate_fixtures;

    fn fixtures(seed: u64) -> Vec<MisalignFixture> {
        let f = generate_fixtures(&misalign_fixture_spec(seed)).unwrap();
        MisalignFixture::from_file(&f.ground_truth).unwrap()
    }

    fn spec(s: &str) -> PerturbationSpec {
        s.parse().unwrap()
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let fx = fixtures(1);
        for mode in ["dilate", "shrink", "snap", "merge"] {
            let p = perturb(&fx[0], &spec(&format!("{mode}:0"))).unwrap();
            let boxes: Vec<_> = p.instances.iter().map(|i| (i.bbox, i.class)).collect();
            let want: Vec<_> = fx[0].ground_truth.instances.iter().map(|i| (i.bbox, i.class)).collect();
            assert_eq!(boxes, want, "{mode}");
            assert!(p.instances.iter().all(|i| i.confidence == Some(1.0)));
        }
    }

    #[test]
    fn identity_row_is_perfect() {
        let rows = misalignment_report(&fixtures(2), &[spec("dilate:0")]).unwrap();
        assert_eq!((rows[0].mean_ap, rows[0].teds), (1.0, 1.0));
    }

    #[test]
    fn snap_changes_boxes_not_structure() {
        let fx = fixtures(3);
        for f in &fx {
            let p = perturb(f, &spec("snap:1")).unwrap();
            for (a, b) in p.instances.iter().zip(&f.ground_truth.instances) {
                assert!(a.bbox.iou(&b.bbox) < 1.0);
            }
        }
        let rows = misalignment_report(&fx, &[spec("snap:1")]).unwrap();
        assert_eq!(rows[0].teds, 1.0);
        assert!(rows[0].mean_ap < 1.0);
    }

    #[test]
    fn merge_two_rows_gives_their_union() {
        let fx = fixtures(4);
        let f = &fx[0];
        let p = perturb(f, &spec("merge:1:9")).unwrap();
        let rows = |s: &AnnotationSet| s.of_class(ComponentClass::Row).map(|i| i.bbox).collect::<Vec<_>>();
        let (before, after) = (rows(&f.ground_truth), rows(&p));
        assert_eq!(after.len() + 1, before.len());
        let fresh: Vec<_> = after.iter().filter(|b| !before.contains(b)).collect();
        assert_eq!(fresh.len(), 1);
        let gone: Vec<_> = before.iter().filter(|b| !after.contains(b)).collect();
        assert_eq!(gone.len(), 2);
        assert_eq!(gone[0].hull(gone[1]), *fresh[0]);
    }

    #[test]
    fn shrink_past_the_box_is_degenerate() {
        let fx = fixtures(5);
        assert!(matches!(perturb(&fx[0], &spec("shrink:1000")), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn divergence_pattern() {
        let rows = misalignment_report(
            &fixtures(6),
            &[spec("dilate:1"), spec("snap:1"), spec("merge:1"), spec("shrink:3")],
        )
        .unwrap();
        let (dilate, snap, merge, shrunk) = (&rows[0], &rows[1], &rows[2], &rows[3]);
        assert!(dilate.mean_ap > snap.mean_ap, "{rows:?}");
        assert_eq!(dilate.teds, snap.teds);
        assert!(merge.teds < snap.teds);
        assert!(merge.mean_ap > shrunk.mean_ap, "{rows:?}");
    }

    #[test]
    fn parse_specs() {
        assert!("snap:1.5".parse::<PerturbationSpec>().is_err());
        assert!("merge:0.5".parse::<PerturbationSpec>().is_err());
        assert!("dilate:-1".parse::<PerturbationSpec>().is_err());
        assert!("wobble:1".parse::<PerturbationSpec>().is_err());
        assert_eq!(spec("merge:2:5").seed, 5);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![ReportRow {
            spec: spec("dilate:2"),
            mean_ap: 0.5,
            teds: 1.0,
        }];
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "spec,mode,magnitude,seed,map,teds\ndilate:2,dilate,2,0,0.500000,1.000000\n"
        );
    }
}
