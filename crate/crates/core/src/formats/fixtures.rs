use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AnnotationFile, ImageRecord, InstanceRecord};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::labelspace::{ComponentClass, LabelMode};
use crate::reconstruct::{grid_to_html, MergedCell, TableGrid};

/// Parameters of the synthetic table generator.
///
/// Each table gets a header (1 or 2 rows) with probability
/// `header_probability`; a one-row header produces a Column Header box equal
/// to its Row box. With probability `span_probability` a table gets one or
/// two spanning cells. Body rows at index `header + 2` or later each become a
/// projected row header with probability `projected_row_probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub n_tables: usize,
    pub min_rows: usize,
    pub max_rows: usize,
    pub min_cols: usize,
    pub max_cols: usize,
    pub span_probability: f64,
    pub header_probability: f64,
    pub projected_row_probability: f64,
    /// Geometry scale range; row heights are 20–40 px and column widths
    /// 40–120 px before scaling.
    pub min_scale: f64,
    pub max_scale: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_tables: 24,
            min_rows: 3,
            max_rows: 8,
            min_cols: 2,
            max_cols: 6,
            span_probability: 0.5,
            header_probability: 0.8,
            projected_row_probability: 0.15,
            min_scale: 0.3,
            max_scale: 1.5,
            seed: 7,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.span_probability,
            self.header_probability,
            self.projected_row_probability,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("fixture probabilities must lie in [0, 1]".into()));
        }
        if self.min_rows < 3 || self.min_rows > self.max_rows {
            return Err(Error::Config(format!(
                "row range {}..={} must start at 3 or more",
                self.min_rows, self.max_rows
            )));
        }
        if self.min_cols < 1 || self.min_cols > self.max_cols {
            return Err(Error::Config(format!("column range {}..={}", self.min_cols, self.max_cols)));
        }
        if !(self.min_scale > 0.0 && self.min_scale <= self.max_scale && self.max_scale.is_finite()) {
            return Err(Error::Config(format!("scale range {}..{}", self.min_scale, self.max_scale)));
        }
        Ok(())
    }
}

/// Ground truth (with html and content extents) and perfect predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub ground_truth: AnnotationFile,
    pub predictions: AnnotationFile,
}

struct Layout {
    row_edges: Vec<f64>,
    col_edges: Vec<f64>,
    /// Per row `(top, bottom)` content insets; per column `(left, right)`.
    row_insets: Vec<(f64, f64)>,
    col_insets: Vec<(f64, f64)>,
}

impl Layout {
    fn row_box(&self, r: usize) -> BBox {
        self.rect(r, r, 0, self.col_edges.len() - 2)
    }

    fn col_box(&self, c: usize) -> BBox {
        self.rect(0, self.row_edges.len() - 2, c, c)
    }

    fn rect(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> BBox {
        BBox::new(self.col_edges[c0], self.row_edges[r0], self.col_edges[c1 + 1], self.row_edges[r1 + 1])
            .expect("edges are increasing")
    }

    /// Extent of the text inside rows `r0..=r1` and columns `c0..=c1`.
    fn content(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> BBox {
        BBox::new(
            self.col_edges[c0] + self.col_insets[c0].0,
            self.row_edges[r0] + self.row_insets[r0].0,
            self.col_edges[c1 + 1] - self.col_insets[c1].1,
            self.row_edges[r1 + 1] - self.row_insets[r1].1,
        )
        .expect("insets stay below half a cell")
    }
}

fn edges(rng: &mut ChaCha8Rng, start: f64, n: usize, lo: f64, hi: f64, scale: f64) -> Vec<f64> {
    let mut e = vec![start];
    for _ in 0..n {
        let size = (rng.gen_range(lo..=hi) * scale).round().max(6.0);
        e.push(e.last().copied().unwrap_or(start) + size);
    }
    e
}

/// Whole-pixel insets of 10–25% of `size` per side, at least one pixel.
fn insets(rng: &mut ChaCha8Rng, sizes: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
    sizes
        .map(|s| {
            let mut side = || (s * rng.gen_range(0.10..=0.25)).round().max(1.0);
            (side(), side())
        })
        .collect()
}

fn section_of(row: usize, header: usize, n_rows: usize) -> std::ops::Range<usize> {
    if row < header {
        0..header
    } else {
        header..n_rows
    }
}

/// Picks up to `count` spanning rectangles that keep every component box distinct.
fn place_spans(
    rng: &mut ChaCha8Rng,
    count: usize,
    n_rows: usize,
    n_cols: usize,
    header: usize,
    projected: &BTreeSet<usize>,
) -> Vec<MergedCell> {
    let mut spans: Vec<MergedCell> = Vec::new();
    let allowed = |m: &MergedCell, spans: &[MergedCell]| {
        let rows = m.rows();
        let section = section_of(m.row_start, header, n_rows);
        !(m.row_span == 1 && m.col_span == 1)
            && m.row_start + m.row_span <= section.end
            && m.col_start + m.col_span <= n_cols
            && !rows.clone().any(|r| projected.contains(&r))
            && !(m.col_span == n_cols && (m.row_span == 1 || rows == (0..header)))
            && m.row_span < n_rows
            && spans.iter().all(|o| {
                o.rows().end <= m.row_start
                    || m.rows().end <= o.row_start
                    || o.cols().end <= m.col_start
                    || m.cols().end <= o.col_start
            })
    };
    for _ in 0..40 {
        if spans.len() == count {
            break;
        }
        let row_start = rng.gen_range(0..n_rows);
        let m = MergedCell {
            row_start,
            col_start: rng.gen_range(0..n_cols),
            row_span: rng.gen_range(1..=2),
            col_span: rng.gen_range(1..=3),
        };
        if allowed(&m, &spans) {
            spans.push(m);
        }
    }
    if spans.is_empty() && count > 0 {
        // Two stacked cells in the first column of a section without projected rows.
        let row_start = if header >= 2 || header == 0 { 0 } else { 1 };
        let fallback = MergedCell {
            row_start,
            col_start: 0,
            row_span: 2,
            col_span: 1,
        };
        if allowed(&fallback, &spans) {
            spans.push(fallback);
        }
    }
    spans
}

fn instance(bbox: BBox, class: ComponentClass, extent: BBox) -> InstanceRecord {
    InstanceRecord {
        bbox: bbox.to_array(),
        class_id: class.id(),
        score: None,
        content_extent: Some(extent.to_array()),
        extra: Default::default(),
    }
}

fn generate_table(rng: &mut ChaCha8Rng, spec: &FixtureSpec, index: usize) -> Result<ImageRecord> {
    let n_rows = rng.gen_range(spec.min_rows..=spec.max_rows);
    let n_cols = rng.gen_range(spec.min_cols..=spec.max_cols);
    let header = if rng.gen_bool(spec.header_probability) {
        rng.gen_range(1..=2usize).min(n_rows - 1)
    } else {
        0
    };
    let projected: BTreeSet<usize> = (header + 2..n_rows)
        .filter(|_| rng.gen_bool(spec.projected_row_probability))
        .collect();
    let span_count = if rng.gen_bool(spec.span_probability) {
        rng.gen_range(1..=2)
    } else {
        0
    };
    let merges = place_spans(rng, span_count, n_rows, n_cols, header, &projected);

    let scale = rng.gen_range(spec.min_scale..=spec.max_scale);
    let pad = (6.0 * scale).round().max(2.0);
    let (ox, oy) = (rng.gen_range(5..=40) as f64, rng.gen_range(5..=40) as f64);
    let row_edges = edges(rng, oy + pad, n_rows, 20.0, 40.0, scale);
    let col_edges = edges(rng, ox + pad, n_cols, 40.0, 120.0, scale);
    let row_insets = insets(rng, row_edges.windows(2).map(|w| w[1] - w[0]));
    let col_insets = insets(rng, col_edges.windows(2).map(|w| w[1] - w[0]));
    let layout = Layout {
        row_edges,
        col_edges,
        row_insets,
        col_insets,
    };
    let (last_r, last_c) = (n_rows - 1, n_cols - 1);
    let inner = layout.rect(0, last_r, 0, last_c);
    let table = inner.expand(pad)?;
    let width = (table.x2() + rng.gen_range(5..=40) as f64) as u32;
    let height = (table.y2() + rng.gen_range(5..=40) as f64) as u32;

    let mut instances = vec![instance(table, ComponentClass::Table, layout.content(0, last_r, 0, last_c))];
    for c in 0..n_cols {
        instances.push(instance(layout.col_box(c), ComponentClass::Column, layout.content(0, last_r, c, c)));
    }
    for r in 0..n_rows {
        instances.push(instance(layout.row_box(r), ComponentClass::Row, layout.content(r, r, 0, last_c)));
    }
    if header > 0 {
        instances.push(instance(
            layout.rect(0, header - 1, 0, last_c),
            ComponentClass::ColumnHeader,
            layout.content(0, header - 1, 0, last_c),
        ));
    }
    for &r in &projected {
        instances.push(instance(layout.row_box(r), ComponentClass::ProjectedRowHeader, layout.content(r, r, 0, last_c)));
    }
    for m in &merges {
        let (r1, c1) = (m.row_start + m.row_span - 1, m.col_start + m.col_span - 1);
        instances.push(instance(
            layout.rect(m.row_start, r1, m.col_start, c1),
            ComponentClass::SpanningCell,
            layout.content(m.row_start, r1, m.col_start, c1),
        ));
    }

    let grid = TableGrid::new(n_rows, n_cols, merges, header, projected)?;
    let mut rec = ImageRecord::new(format!("table_{index:04}"), width, height);
    rec.instances = instances;
    rec.html = Some(grid_to_html(&grid));
    Ok(rec)
}

/// Deterministic synthetic corpus: the same spec always yields identical files.
pub fn generate_fixtures(spec: &FixtureSpec) -> Result<Fixtures> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let images = (0..spec.n_tables)
        .map(|i| generate_table(&mut rng, spec, i))
        .collect::<Result<Vec<_>>>()?;
    let predictions = images
        .iter()
        .map(|img| {
            let mut p = ImageRecord::new(img.image_id.clone(), img.width, img.height);
            p.instances = img
                .instances
                .iter()
                .map(|i| InstanceRecord {
                    score: Some(1.0),
                    content_extent: None,
                    ..i.clone()
                })
                .collect();
            p
        })
        .collect();
    Ok(Fixtures {
        ground_truth: AnnotationFile::new(LabelMode::MultiLabel, images),
        predictions: AnnotationFile::new(LabelMode::MultiLabel, predictions),
    })
}
