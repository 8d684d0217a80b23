mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use tsr_core::formats::{generate_fixtures, FixtureSpec};
use tsr_core::labelspace::{decode_pseudo, encode_pseudo, DEFAULT_BOX_MATCH_TOLERANCE};
use tsr_core::reconstruct::{build_grid, grid_from_tree, grid_to_html, MergedCell, ReconstructionConfig, TableGrid};
use tsr_core::teds::{parse_table_html, teds_html};
use tsr_core::{AnnotationSet, ComponentClass, ComponentInstance};

use common::seeded;

fn fixture_sets(seed: u64, n: usize) -> Vec<(AnnotationSet, String)> {
    let f = generate_fixtures(&FixtureSpec {
        n_tables: n,
        seed,
        ..FixtureSpec::default()
    })
    .unwrap();
    let sets = f.ground_truth.annotation_sets().unwrap();
    sets.into_iter()
        .zip(f.ground_truth.images.iter().map(|i| i.html.clone().unwrap()))
        .collect()
}

fn as_multiset(set: &AnnotationSet) -> Vec<([u64; 4], ComponentClass)> {
    let mut v: Vec<_> = set
        .instances
        .iter()
        .map(|i| (i.bbox.to_array().map(f64::to_bits), i.class))
        .collect();
    v.sort();
    v
}

/// Random valid grid: disjoint merges, projected rows clear of merges.
fn random_grid(seed: u64) -> TableGrid {
    let mut rng = seeded(seed);
    let (n_rows, n_cols) = (rng.gen_range(1..8), rng.gen_range(1..7));
    let mut merges: Vec<MergedCell> = Vec::new();
    let mut taken = vec![vec![false; n_cols]; n_rows];
    for _ in 0..rng.gen_range(0..4) {
        let m = MergedCell {
            row_start: rng.gen_range(0..n_rows),
            col_start: rng.gen_range(0..n_cols),
            row_span: rng.gen_range(1..4),
            col_span: rng.gen_range(1..4),
        };
        if m.row_span * m.col_span < 2 || m.row_start + m.row_span > n_rows || m.col_start + m.col_span > n_cols {
            continue;
        }
        if m.rows().any(|r| m.cols().any(|c| taken[r][c])) {
            continue;
        }
        for r in m.rows() {
            for c in m.cols() {
                taken[r][c] = true;
            }
        }
        merges.push(m);
    }
    let projected: BTreeSet<usize> = (0..n_rows)
        .filter(|&r| !taken[r].iter().any(|t| *t) && rng.gen_bool(0.2))
        .collect();
    let header = rng.gen_range(0..=n_rows);
    TableGrid::new(n_rows, n_cols, merges, header, projected).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_class_round_trip(seed in any::<u64>()) {
        for (gt, _) in fixture_sets(seed, 4) {
            let enc = encode_pseudo(&gt, DEFAULT_BOX_MATCH_TOLERANCE).unwrap();
            prop_assert!(enc.instances.len() <= gt.instances.len());
            for (k, a) in enc.instances.iter().enumerate() {
                for b in &enc.instances[k + 1..] {
                    prop_assert!(a.class == b.class || !a.bbox.approx_eq(&b.bbox, DEFAULT_BOX_MATCH_TOLERANCE));
                }
            }
            let dec = decode_pseudo(&enc).unwrap();
            prop_assert!(dec.instances.len() >= enc.instances.len());
            prop_assert!(dec.instances.iter().all(|i| i.class != ComponentClass::PseudoHeaderRow));
            prop_assert_eq!(as_multiset(&dec), as_multiset(&gt));
        }
    }

    #[test]
    fn grid_html_round_trip(seed in any::<u64>()) {
        let g = random_grid(seed);
        let back = grid_from_tree(&parse_table_html(&grid_to_html(&g)).unwrap()).unwrap();
        prop_assert_eq!(back.logical_cells(), g.logical_cells());
        prop_assert_eq!(back.header_rows(), g.header_rows());
        prop_assert_eq!((back.n_rows(), back.n_cols()), (g.n_rows(), g.n_cols()));
        let area: usize = g.logical_cells().iter().map(|c| c.row_span * c.col_span).sum();
        prop_assert_eq!(area, g.n_rows() * g.n_cols());
    }

    #[test]
    fn build_grid_ignores_detection_order(seed in any::<u64>()) {
        let cfg = ReconstructionConfig::default();
        let mut rng = seeded(seed);
        for (gt, _) in fixture_sets(seed, 3) {
            let mut pred = gt.clone();
            for i in &mut pred.instances {
                *i = ComponentInstance::predicted(i.bbox, i.class, rng.gen_range(0.5..1.0)).unwrap();
            }
            let base = build_grid(&pred, &cfg).unwrap();
            pred.instances.shuffle(&mut rng);
            prop_assert_eq!(build_grid(&pred, &cfg).unwrap(), base);
        }
    }

    #[test]
    fn perfect_detections_score_one(seed in any::<u64>()) {
        let cfg = ReconstructionConfig::default();
        for (gt, html) in fixture_sets(seed, 4) {
            let out = grid_to_html(&build_grid(&gt, &cfg).unwrap());
            prop_assert_eq!(teds_html(&out, &html).unwrap(), 1.0);
        }
    }
}
