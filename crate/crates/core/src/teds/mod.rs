//! Structure-only tree-edit-distance similarity (TEDS) between HTML tables.

mod edit;
mod html;
mod tree;

pub use edit::{tree_edit_distance, CostModel, EditCosts};
pub use html::parse_table_html;
pub use tree::{NodeLabel, OrderedTree, TableTree, Tag};

use crate::error::{Error, Result};

/// `1 - d / max(|a|, |b|)` under unit costs, clamped to `[0, 1]`.
pub fn teds(a: &TableTree, b: &TableTree) -> f64 {
    let size = a.len().max(b.len());
    if size == 0 {
        return 1.0;
    }
    let d = tree_edit_distance(a, b, &EditCosts::default());
    (1.0 - d / size as f64).clamp(0.0, 1.0)
}

/// Parses both sequences and scores them.
pub fn teds_html(predicted: &str, ground_truth: &str) -> Result<f64> {
    Ok(teds(&parse_table_html(predicted)?, &parse_table_html(ground_truth)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Complexity {
    Simple,
    Complex,
}

#[derive(Debug, Clone)]
pub struct TedsPair {
    pub sample_id: String,
    pub predicted_html: String,
    pub ground_truth_html: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub sample_id: String,
    pub complexity: Complexity,
    pub score: f64,
    /// Parse failure of the prediction, which scores 0.
    pub prediction_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusTeds {
    pub simple_mean: Option<f64>,
    pub complex_mean: Option<f64>,
    pub overall_mean: Option<f64>,
    pub pairs: Vec<PairScore>,
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn corpus_teds(pairs: &[TedsPair]) -> Result<CorpusTeds> {
    let mut scores = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let gt = parse_table_html(&pair.ground_truth_html).map_err(|e| Error::Corpus {
            sample: pair.sample_id.clone(),
            message: format!("ground truth does not parse: {e}"),
        })?;
        let complexity = if gt.is_complex() {
            Complexity::Complex
        } else {
            Complexity::Simple
        };
        let (score, prediction_error) = match parse_table_html(&pair.predicted_html) {
            Ok(pred) => (teds(&pred, &gt), None),
            Err(e) => (0.0, Some(e.to_string())),
        };
        scores.push(PairScore {
            sample_id: pair.sample_id.clone(),
            complexity,
            score,
            prediction_error,
        });
    }
    let mean_of = |c: Option<Complexity>| {
        stable_mean(
            scores
                .iter()
                .filter(|s| c.is_none_or(|c| s.complexity == c))
                .map(|s| s.score),
        )
    };
    Ok(CorpusTeds {
        simple_mean: mean_of(Some(Complexity::Simple)),
        complex_mean: mean_of(Some(Complexity::Complex)),
        overall_mean: mean_of(None),
        pairs: scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CELL: &str = "<table><tbody><tr><td></td></tr></tbody></table>";

    fn pair(id: &str, pred: &str, gt: &str) -> TedsPair {
        TedsPair {
            sample_id: id.into(),
            predicted_html: pred.into(),
            ground_truth_html: gt.into(),
        }
    }

    #[test]
    fn identical_is_one() {
        let t = parse_table_html(ONE_CELL).unwrap();
        assert_eq!(teds(&t, &t), 1.0);
    }

    #[test]
    fn one_extra_cell() {
        // 5 nodes vs 6 nodes, one insertion
        let a = parse_table_html("<table><tbody><tr><td></td><td></td></tr></tbody></table>").unwrap();
        let b = parse_table_html("<table><tbody><tr><td></td><td></td><td></td></tr></tbody></table>").unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(tree_edit_distance(&a, &b, &EditCosts::default()), 1.0);
        assert!((teds(&a, &b) - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn equal_size_distance_one() {
        let a = parse_table_html("<table><tbody><tr><td></td><td></td></tr></tbody></table>").unwrap();
        let b = parse_table_html(r#"<table><tbody><tr><td></td><td colspan="2"></td></tr></tbody></table>"#).unwrap();
        assert!((teds(&a, &b) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn colspan_difference_in_six_node_trees() {
        let a = parse_table_html(r#"<table><tbody><tr><td colspan="2"></td></tr><tr><td></td></tr></tbody></table>"#)
            .unwrap();
        let b = parse_table_html(r#"<table><tbody><tr><td></td></tr><tr><td></td></tr></tbody></table>"#).unwrap();
        assert_eq!((a.len(), b.len()), (6, 6));
        assert!((teds(&a, &b) - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn corpus_arithmetic() {
        let simple_gt = "<table><tbody><tr><td></td><td></td></tr></tbody></table>";
        let simple_pred = r#"<table><tbody><tr><td></td><td colspan="2"></td></tr></tbody></table>"#;
        let r = corpus_teds(&[pair("a", simple_pred, simple_gt), pair("b", ONE_CELL, ONE_CELL)]).unwrap();
        assert!((r.simple_mean.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(r.complex_mean, None);

        // simple pair at 0.8, complex pair at 0.6 (two renames over five nodes)
        let complex_gt = r#"<table><tbody><tr><td colspan="2"></td><td></td></tr></tbody></table>"#;
        let complex_pred = "<table><thead><tr><td></td><td></td></tr></thead></table>";
        let r = corpus_teds(&[pair("c", complex_pred, complex_gt), pair("d", simple_pred, simple_gt)]).unwrap();
        assert!((r.complex_mean.unwrap() - 0.6).abs() < 1e-12);
        assert!((r.simple_mean.unwrap() - 0.8).abs() < 1e-12);
        assert!((r.overall_mean.unwrap() - 0.7).abs() < 1e-12);

        let r = corpus_teds(&[pair("e", "<table></table>", complex_gt)]).unwrap();
        assert!((r.complex_mean.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unparsable_prediction_scores_zero() {
        let r = corpus_teds(&[pair("x", "<table><tr>", ONE_CELL)]).unwrap();
        assert_eq!(r.overall_mean, Some(0.0));
        assert!(r.pairs[0].prediction_error.is_some());
    }

    #[test]
    fn unparsable_ground_truth_names_sample() {
        let e = corpus_teds(&[pair("bad-gt", ONE_CELL, "<table>")]).unwrap_err();
        assert!(matches!(e, Error::Corpus { ref sample, .. } if sample == "bad-gt"));
    }
}
