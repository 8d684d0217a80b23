//! Rule-based assembly of detected table components into a logical grid and
//! structure-only HTML.
//!
//! Rules applied by [`build_grid`], in order:
//!
//! 1. drop detections scoring below their class threshold (ground truth,
//!    which has no score, always passes);
//! 2. class-wise greedy NMS: a box is suppressed when its IoU with a
//!    higher-ranked box of the same class exceeds `nms_iou`;
//! 3. clip Rows and Columns to the top-ranked Table box, if any;
//! 4. sort Rows by top edge and Columns by left edge; cell `(i, j)` is the
//!    intersection of Row `i` and Column `j`;
//! 5. header rows are the longest run of rows, starting at row 0, whose
//!    centers lie inside a Column Header box;
//! 6. a row whose center lies inside a Projected Row Header box becomes one
//!    full-width cell;
//! 7. a Spanning Cell absorbs every grid cell it covers by at least
//!    `span_overlap_threshold` of the cell's area; the absorbed set is
//!    widened to its bounding row/column range. Spans that would overlap an
//!    earlier-ranked span or a projected row are discarded.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::Range;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::labelspace::{AnnotationSet, ComponentClass, ComponentInstance, LabelMode, DEFAULT_BOX_MATCH_TOLERANCE};
use crate::teds::{NodeLabel, TableTree, Tag};

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    /// Indexed by class id.
    pub score_thresholds: [f64; 7],
    pub span_overlap_threshold: f64,
    pub nms_iou: f64,
    pub box_match_tolerance: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            score_thresholds: [0.5; 7],
            span_overlap_threshold: 0.5,
            nms_iou: 0.5,
            box_match_tolerance: DEFAULT_BOX_MATCH_TOLERANCE,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.score_thresholds.iter().all(|&t| unit(t)) || !unit(self.span_overlap_threshold) || !unit(self.nms_iou) {
            return Err(Error::Config("reconstruction thresholds must lie in [0, 1]".into()));
        }
        if !(self.box_match_tolerance >= 0.0) {
            return Err(Error::Config("box match tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn score_threshold(&self, class: ComponentClass) -> f64 {
        self.score_thresholds[class.id() as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergedCell {
    pub row_start: usize,
    pub col_start: usize,
    pub row_span: usize,
    pub col_span: usize,
}

impl MergedCell {
    pub fn rows(&self) -> Range<usize> {
        self.row_start..self.row_start + self.row_span
    }

    pub fn cols(&self) -> Range<usize> {
        self.col_start..self.col_start + self.col_span
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.rows().contains(&row) && self.cols().contains(&col)
    }

    fn overlaps(&self, other: &MergedCell) -> bool {
        self.row_start < other.row_start + other.row_span
            && other.row_start < self.row_start + self.row_span
            && self.col_start < other.col_start + other.col_span
            && other.col_start < self.col_start + self.col_span
    }
}

/// What occupies one grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRef {
    Own,
    /// Index into [`TableGrid::merges`].
    Merged(usize),
    Projected,
}

/// One logical cell: its anchor and extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogicalCell {
    pub row: usize,
    pub col: usize,
    pub row_span: usize,
    pub col_span: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableComplexity {
    Simple,
    Complex,
}

/// Logical `n_rows x n_cols` lattice with merged regions, a header prefix
/// and full-width projected rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableGrid {
    n_rows: usize,
    n_cols: usize,
    merges: Vec<MergedCell>,
    header_rows: usize,
    projected_rows: BTreeSet<usize>,
}

impl TableGrid {
    /// Validates and builds a grid. `header_rows` counts the leading rows
    /// that form the header.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        mut merges: Vec<MergedCell>,
        header_rows: usize,
        projected_rows: BTreeSet<usize>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::EmptyStructure(format!("{n_rows} rows x {n_cols} columns")));
        }
        if header_rows > n_rows {
            return Err(Error::InvalidInput(format!("{header_rows} header rows in a {n_rows}-row grid")));
        }
        if let Some(&r) = projected_rows.iter().find(|&&r| r >= n_rows) {
            return Err(Error::InvalidInput(format!("projected row {r} outside the grid")));
        }
        for (k, m) in merges.iter().enumerate() {
            if m.row_span == 0 || m.col_span == 0 || (m.row_span == 1 && m.col_span == 1) {
                return Err(Error::InvalidInput(format!("merge {m:?} must span at least two positions")));
            }
            if m.row_start + m.row_span > n_rows || m.col_start + m.col_span > n_cols {
                return Err(Error::InvalidInput(format!("merge {m:?} exceeds the grid")));
            }
            if m.rows().any(|r| projected_rows.contains(&r)) {
                return Err(Error::InvalidInput(format!("merge {m:?} overlaps a projected row")));
            }
            if let Some(other) = merges[..k].iter().find(|o| o.overlaps(m)) {
                return Err(Error::InvalidInput(format!("merges {other:?} and {m:?} overlap")));
            }
        }
        merges.sort();
        Ok(TableGrid {
            n_rows,
            n_cols,
            merges,
            header_rows,
            projected_rows,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn merges(&self) -> &[MergedCell] {
        &self.merges
    }

    pub fn header_rows(&self) -> Range<usize> {
        0..self.header_rows
    }

    pub fn projected_rows(&self) -> &BTreeSet<usize> {
        &self.projected_rows
    }

    pub fn cell_ref(&self, row: usize, col: usize) -> CellRef {
        if self.projected_rows.contains(&row) {
            CellRef::Projected
        } else if let Some(k) = self.merges.iter().position(|m| m.contains(row, col)) {
            CellRef::Merged(k)
        } else {
            CellRef::Own
        }
    }

    pub fn cells(&self) -> Vec<Vec<CellRef>> {
        (0..self.n_rows)
            .map(|r| (0..self.n_cols).map(|c| self.cell_ref(r, c)).collect())
            .collect()
    }

    /// Logical cells in row-major order of their anchors; projected rows
    /// count as one full-width cell.
    pub fn logical_cells(&self) -> Vec<LogicalCell> {
        let mut out = Vec::new();
        for row in 0..self.n_rows {
            if self.projected_rows.contains(&row) {
                out.push(LogicalCell {
                    row,
                    col: 0,
                    row_span: 1,
                    col_span: self.n_cols,
                });
                continue;
            }
            for col in 0..self.n_cols {
                match self.cell_ref(row, col) {
                    CellRef::Own => out.push(LogicalCell {
                        row,
                        col,
                        row_span: 1,
                        col_span: 1,
                    }),
                    CellRef::Merged(k) => {
                        let m = self.merges[k];
                        if m.row_start == row && m.col_start == col {
                            out.push(LogicalCell {
                                row,
                                col,
                                row_span: m.row_span,
                                col_span: m.col_span,
                            });
                        }
                    }
                    CellRef::Projected => unreachable!("handled above"),
                }
            }
        }
        out
    }
}

pub fn classify_complexity(grid: &TableGrid) -> TableComplexity {
    if !grid.merges.is_empty() || (!grid.projected_rows.is_empty() && grid.n_cols > 1) {
        TableComplexity::Complex
    } else {
        TableComplexity::Simple
    }
}

/// Ranking used everywhere a deterministic order over detections is
/// needed: confidence descending (ground truth counts as 1), then box
/// coordinates, then class.
fn rank(a: &ComponentInstance, b: &ComponentInstance) -> Ordering {
    let ca = a.confidence.unwrap_or(1.0);
    let cb = b.confidence.unwrap_or(1.0);
    cb.total_cmp(&ca)
        .then_with(|| {
            a.bbox
                .to_array()
                .iter()
                .zip(b.bbox.to_array().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.class.cmp(&b.class))
}

/// Class-wise greedy non-maximum suppression; output is in rank order.
pub fn class_wise_nms(instances: &[ComponentInstance], iou_threshold: f64) -> Vec<ComponentInstance> {
    let mut sorted = instances.to_vec();
    sorted.sort_by(rank);
    let mut kept: Vec<ComponentInstance> = Vec::with_capacity(sorted.len());
    for cand in sorted {
        let suppressed = kept
            .iter()
            .any(|k| k.class == cand.class && k.bbox.iou(&cand.bbox) > iou_threshold);
        if !suppressed {
            kept.push(cand);
        }
    }
    kept
}

fn cmp_coords(a: &BBox, b: &BBox, order: [usize; 4]) -> Ordering {
    let (a, b) = (a.to_array(), b.to_array());
    order
        .iter()
        .map(|&k| a[k].total_cmp(&b[k]))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub fn build_grid(detections: &AnnotationSet, cfg: &ReconstructionConfig) -> Result<TableGrid> {
    cfg.validate()?;
    if detections.mode != LabelMode::MultiLabel {
        return Err(Error::Mode {
            expected: LabelMode::MultiLabel.as_str(),
            found: detections.mode.as_str(),
        });
    }
    let surviving: Vec<ComponentInstance> = detections
        .instances
        .iter()
        .filter(|i| i.confidence.is_none_or(|c| c >= cfg.score_threshold(i.class)))
        .copied()
        .collect();
    let kept = class_wise_nms(&surviving, cfg.nms_iou);
    let of = |class| kept.iter().filter(move |i: &&ComponentInstance| i.class == class);

    let table = of(ComponentClass::Table).next().map(|t| t.bbox);
    if table.is_none() {
        warn!("image {}: no Table box, rows and columns are not clipped", detections.image_id);
    }
    let clip = |b: BBox| match table {
        Some(t) => t.intersection(&b),
        None => Some(b),
    };

    let mut rows: Vec<BBox> = of(ComponentClass::Row).filter_map(|i| clip(i.bbox)).collect();
    let mut cols: Vec<BBox> = of(ComponentClass::Column).filter_map(|i| clip(i.bbox)).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyStructure(format!(
            "image {}: {} rows and {} columns survive",
            detections.image_id,
            rows.len(),
            cols.len()
        )));
    }
    rows.sort_by(|a, b| cmp_coords(a, b, [1, 3, 0, 2]));
    cols.sort_by(|a, b| cmp_coords(a, b, [0, 2, 1, 3]));

    let center_in = |row: &BBox, class| {
        let (cx, cy) = row.center();
        of(class).any(|c: &ComponentInstance| c.bbox.contains_point(cx, cy))
    };
    let header_rows = rows
        .iter()
        .take_while(|r| center_in(r, ComponentClass::ColumnHeader))
        .count();
    let projected_rows: BTreeSet<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| center_in(r, ComponentClass::ProjectedRowHeader))
        .map(|(i, _)| i)
        .collect();

    let mut merges: Vec<MergedCell> = Vec::new();
    for span in of(ComponentClass::SpanningCell) {
        let mut rr: Option<(usize, usize)> = None;
        let mut cr: Option<(usize, usize)> = None;
        for (i, row) in rows.iter().enumerate() {
            for (j, col) in cols.iter().enumerate() {
                let Some(cell) = row.intersection(col) else { continue };
                let area = cell.area();
                if area <= 0.0 || cell.intersection_area(&span.bbox) / area < cfg.span_overlap_threshold {
                    continue;
                }
                rr = Some(rr.map_or((i, i), |(a, b)| (a.min(i), b.max(i))));
                cr = Some(cr.map_or((j, j), |(a, b)| (a.min(j), b.max(j))));
            }
        }
        let (Some((r0, r1)), Some((c0, c1))) = (rr, cr) else {
            debug!("spanning cell {} absorbs no grid cell", span.bbox);
            continue;
        };
        let merge = MergedCell {
            row_start: r0,
            col_start: c0,
            row_span: r1 - r0 + 1,
            col_span: c1 - c0 + 1,
        };
        if merge.row_span == 1 && merge.col_span == 1 {
            continue;
        }
        if merge.rows().any(|r| projected_rows.contains(&r)) || merges.iter().any(|m| m.overlaps(&merge)) {
            debug!("spanning cell {} conflicts with an earlier span or projected row", span.bbox);
            continue;
        }
        merges.push(merge);
    }

    TableGrid::new(rows.len(), cols.len(), merges, header_rows, projected_rows)
}

pub fn grid_to_tree(grid: &TableGrid) -> TableTree {
    let mut tree = TableTree::new(NodeLabel::tag(Tag::Table));
    let emit_rows = |tree: &mut TableTree, group: usize, rows: Range<usize>| {
        for row in rows {
            let tr = tree.add_child(group, NodeLabel::tag(Tag::Tr));
            if grid.projected_rows.contains(&row) {
                tree.add_child(tr, NodeLabel::cell(1, grid.n_cols as u32));
                continue;
            }
            for col in 0..grid.n_cols {
                match grid.cell_ref(row, col) {
                    CellRef::Own => {
                        tree.add_child(tr, NodeLabel::cell(1, 1));
                    }
                    CellRef::Merged(k) => {
                        let m = grid.merges[k];
                        if m.row_start == row && m.col_start == col {
                            tree.add_child(tr, NodeLabel::cell(m.row_span as u32, m.col_span as u32));
                        }
                    }
                    CellRef::Projected => unreachable!("projected rows handled above"),
                }
            }
        }
    };
    if grid.header_rows > 0 {
        let thead = tree.add_child(0, NodeLabel::tag(Tag::Thead));
        emit_rows(&mut tree, thead, grid.header_rows());
    }
    if grid.header_rows < grid.n_rows {
        let tbody = tree.add_child(0, NodeLabel::tag(Tag::Tbody));
        emit_rows(&mut tree, tbody, grid.header_rows..grid.n_rows);
    }
    tree
}

/// Compact structure-only HTML: lowercase tags, no whitespace, `colspan`
/// before `rowspan`, span attributes omitted when 1.
pub fn grid_to_html(grid: &TableGrid) -> String {
    grid_to_tree(grid).to_html()
}

/// Expands a parsed table back into a lattice. Full-width cells are read
/// as merges, so compare results through [`TableGrid::logical_cells`].
pub fn grid_from_tree(tree: &TableTree) -> Result<TableGrid> {
    let bad = |msg: String| Error::InvalidInput(format!("table tree does not form a lattice: {msg}"));
    let mut rows: Vec<(bool, Vec<NodeLabel>)> = Vec::new();
    for &group in tree.children(tree.root()) {
        let is_header = tree.label(group).tag == Tag::Thead;
        for &tr in tree.children(group) {
            let cells = tree.children(tr).iter().map(|&c| *tree.label(c)).collect();
            rows.push((is_header, cells));
        }
    }
    let header_rows = rows.iter().take_while(|(h, _)| *h).count();
    if rows[header_rows..].iter().any(|(h, _)| *h) {
        return Err(bad("header rows are not a prefix".into()));
    }

    let n_rows = rows.len();
    let mut occupied: Vec<Vec<bool>> = vec![Vec::new(); n_rows];
    let mut anchors = Vec::new();
    for (r, (_, cells)) in rows.iter().enumerate() {
        let mut c = 0;
        for cell in cells {
            while occupied[r].get(c).copied().unwrap_or(false) {
                c += 1;
            }
            let (rs, cs) = (cell.rowspan as usize, cell.colspan as usize);
            if r + rs > n_rows {
                return Err(bad(format!("rowspan {rs} at row {r} runs past the last row")));
            }
            for rr in r..r + rs {
                if occupied[rr].len() < c + cs {
                    occupied[rr].resize(c + cs, false);
                }
                for cc in c..c + cs {
                    if occupied[rr][cc] {
                        return Err(bad(format!("cells overlap at ({rr}, {cc})")));
                    }
                    occupied[rr][cc] = true;
                }
            }
            anchors.push(MergedCell {
                row_start: r,
                col_start: c,
                row_span: rs,
                col_span: cs,
            });
            c += cs;
        }
    }
    let n_cols = occupied.iter().map(Vec::len).max().unwrap_or(0);
    if let Some(r) = occupied.iter().position(|o| o.len() != n_cols || o.iter().any(|x| !x)) {
        return Err(bad(format!("row {r} is ragged")));
    }
    let merges = anchors.into_iter().filter(|m| m.row_span > 1 || m.col_span > 1).collect();
    TableGrid::new(n_rows, n_cols, merges, header_rows, BTreeSet::new())
}
